//! Run configuration: one JSON file per experiment, strict about unknown
//! fields, with every scientific parameter in the file rather than on the
//! command line. The command line only picks the file, the output directory,
//! and the thread count; `FIXPOINT_LAB_SEED` overrides the file's seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::RunError;

/// The eight experiment kinds, in their config-file spellings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    RegularOp,
    ReciprocalDemo,
    Manifold,
    LpGenerate,
    LpTrain,
    LpEval,
    LipschitzCurve,
    SolverBench,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::RegularOp,
        Kind::ReciprocalDemo,
        Kind::Manifold,
        Kind::LpGenerate,
        Kind::LpTrain,
        Kind::LpEval,
        Kind::LipschitzCurve,
        Kind::SolverBench,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Kind::RegularOp => "regular-op",
            Kind::ReciprocalDemo => "reciprocal-demo",
            Kind::Manifold => "manifold",
            Kind::LpGenerate => "lp-generate",
            Kind::LpTrain => "lp-train",
            Kind::LpEval => "lp-eval",
            Kind::LipschitzCurve => "lipschitz-curve",
            Kind::SolverBench => "solver-bench",
        }
    }

    pub fn from_label(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.label() == s)
    }

    /// Whether `--threads > 1` is honored. Training and generation stay on
    /// one thread so artifacts cannot depend on scheduling; evaluation-style
    /// experiments aggregate in fixed order and may fan out.
    pub fn threaded_eval(self) -> bool {
        matches!(self, Kind::LpEval | Kind::LipschitzCurve)
    }
}

/// The top-level file shape. `params` is decoded per kind after the
/// envelope is accepted.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    params: Option<serde_json::Value>,
}

/// A config after envelope checks, seed override, and output-directory
/// resolution. `params` is still kind-shaped JSON; each experiment decodes
/// its own record (strictly) so unknown fields fail loudly either way.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub kind: Kind,
    pub seed: u64,
    pub out: PathBuf,
    pub params: serde_json::Value,
}

impl ResolvedConfig {
    /// Decodes the kind-specific parameter record, rejecting unknown fields.
    pub fn params_as<T: for<'de> Deserialize<'de>>(&self) -> Result<T, RunError> {
        serde_json::from_value(self.params.clone())
            .map_err(|e| RunError::Validation(format!("bad params: {e}")))
    }
}

/// Reads and resolves a config file. `cli_out` (from `--out`) wins over the
/// file's `out`; `seed_override` (from `FIXPOINT_LAB_SEED`) wins over the
/// file's `seed`. The experiment name must match the invoked subcommand.
pub fn load_config(
    path: &Path,
    expect: Kind,
    cli_out: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<ResolvedConfig, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let raw: RawConfig = serde_json::from_str(&text)
        .map_err(|e| RunError::Validation(format!("bad config {}: {e}", path.display())))?;
    let kind = Kind::from_label(&raw.experiment).ok_or_else(|| {
        RunError::Validation(format!("unknown experiment kind {:?}", raw.experiment))
    })?;
    if kind != expect {
        return Err(RunError::Validation(format!(
            "config declares experiment {:?} but the {} subcommand was invoked",
            raw.experiment,
            expect.label()
        )));
    }
    let out = cli_out
        .map(Path::to_path_buf)
        .or(raw.out)
        .ok_or_else(|| RunError::Validation("no output directory: set --out or \"out\"".into()))?;
    Ok(ResolvedConfig {
        kind,
        seed: seed_override.unwrap_or(raw.seed),
        out,
        params: raw.params.unwrap_or_else(|| serde_json::Value::Object(Default::default())),
    })
}

/// What gets written back next to the artifacts: the envelope after all
/// overrides, plus the fully defaulted parameter record the run used.
#[derive(Debug, Serialize)]
struct ResolvedFile<'a, P: Serialize> {
    experiment: &'a str,
    seed: u64,
    out: &'a Path,
    params: &'a P,
}

/// Writes `config.resolved.json` into the output directory. Called by every
/// experiment with its concrete (defaults-applied) parameter record.
pub fn write_resolved<P: Serialize>(cfg: &ResolvedConfig, params: &P) -> Result<(), RunError> {
    let file = ResolvedFile {
        experiment: cfg.kind.label(),
        seed: cfg.seed,
        out: &cfg.out,
        params,
    };
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| RunError::Validation(format!("cannot encode resolved config: {e}")))?;
    std::fs::write(cfg.out.join("config.resolved.json"), text + "\n")
        .map_err(|e| RunError::Validation(format!("cannot write resolved config: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn kind_labels_round_trip() {
        for k in Kind::ALL {
            assert_eq!(Kind::from_label(k.label()), Some(k));
        }
        assert_eq!(Kind::from_label("no-such-kind"), None);
    }

    #[test]
    fn unknown_envelope_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            dir.path(),
            "c.json",
            r#"{"experiment":"reciprocal-demo","seed":1,"out":"o","extra":true}"#,
        );
        let err = load_config(&p, Kind::ReciprocalDemo, None, None).unwrap_err();
        assert!(matches!(err, RunError::Validation(_)), "{err}");
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn subcommand_and_file_kind_must_agree() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(dir.path(), "c.json", r#"{"experiment":"manifold","out":"o"}"#);
        let err = load_config(&p, Kind::ReciprocalDemo, None, None).unwrap_err();
        assert!(err.to_string().contains("subcommand"), "{err}");
    }

    #[test]
    fn overrides_beat_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            dir.path(),
            "c.json",
            r#"{"experiment":"manifold","seed":3,"out":"file-out"}"#,
        );
        let cfg = load_config(&p, Kind::Manifold, Some(Path::new("cli-out")), Some(99)).unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.out, PathBuf::from("cli-out"));
        let cfg = load_config(&p, Kind::Manifold, None, None).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.out, PathBuf::from("file-out"));
    }

    #[test]
    fn missing_out_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(dir.path(), "c.json", r#"{"experiment":"manifold"}"#);
        let err = load_config(&p, Kind::Manifold, None, None).unwrap_err();
        assert!(err.to_string().contains("output directory"), "{err}");
    }
}
