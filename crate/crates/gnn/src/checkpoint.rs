//! Checkpoints: a small JSON manifest describing the architecture plus a
//! flat little-endian parameter file. Loading rebuilds the architecture from
//! the manifest and refuses anything whose parameter count disagrees.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use fixlab_nn::{read_f64s, write_f64s};
use serde::{Deserialize, Serialize};

use crate::model::{GnnMode, GnnParams};
use crate::GnnError;

#[derive(Serialize, Deserialize)]
struct Manifest {
    emb: usize,
    layers: usize,
    mode: String,
    params: usize,
}

/// Writes `name.json` and `name.bin` under `dir`.
pub fn save_gnn(dir: &Path, name: &str, p: &GnnParams) -> Result<(), GnnError> {
    let manifest = Manifest {
        emb: p.emb,
        layers: p.layers,
        mode: p.mode.label().to_string(),
        params: p.param_count(),
    };
    std::fs::write(dir.join(format!("{name}.json")), serde_json::to_string(&manifest)?)?;
    let mut w = BufWriter::new(File::create(dir.join(format!("{name}.bin")))?);
    write_f64s(&mut w, &p.flat())?;
    Ok(())
}

pub fn load_gnn(dir: &Path, name: &str) -> Result<GnnParams, GnnError> {
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{name}.json")))?)?;
    let mode = GnnMode::from_label(&manifest.mode)
        .ok_or_else(|| GnnError::BadManifest(format!("unknown mode {:?}", manifest.mode)))?;
    if manifest.layers < 2 {
        return Err(GnnError::BadManifest(format!("layers = {}", manifest.layers)));
    }
    let mut p = GnnParams::zeros(manifest.emb, manifest.layers, mode);
    if p.param_count() != manifest.params {
        return Err(GnnError::BadManifest(format!(
            "architecture holds {} parameters, manifest says {}",
            p.param_count(),
            manifest.params
        )));
    }
    let mut r = BufReader::new(File::open(dir.join(format!("{name}.bin")))?);
    let flat = read_f64s(&mut r, manifest.params)?;
    p.set_flat(&flat);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fixlab_core::numerics::Rng;

    #[test]
    fn checkpoints_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Rng::new(2);
        let p = GnnParams::xavier(5, 3, GnnMode::Implicit, &mut rng);
        save_gnn(dir.path(), "model", &p).unwrap();
        let q = load_gnn(dir.path(), "model").unwrap();
        assert_eq!(q.emb, 5);
        assert_eq!(q.layers, 3);
        assert_eq!(q.mode, GnnMode::Implicit);
        let (a, b) = (p.flat(), q.flat());
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn corrupt_mode_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Rng::new(3);
        let p = GnnParams::xavier(3, 3, GnnMode::Explicit, &mut rng);
        save_gnn(dir.path(), "model", &p).unwrap();
        let manifest_path = dir.path().join("model.json");
        let text = std::fs::read_to_string(&manifest_path).unwrap();
        std::fs::write(&manifest_path, text.replace("explicit", "both")).unwrap();
        match load_gnn(dir.path(), "model") {
            Err(GnnError::BadManifest(msg)) => assert!(msg.contains("both")),
            other => panic!("expected a manifest error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_parameter_count_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Rng::new(4);
        let p = GnnParams::xavier(3, 3, GnnMode::Implicit, &mut rng);
        save_gnn(dir.path(), "model", &p).unwrap();
        let manifest_path = dir.path().join("model.json");
        let text = std::fs::read_to_string(&manifest_path).unwrap();
        let wrong = text.replace(
            &format!("\"params\":{}", p.param_count()),
            &format!("\"params\":{}", p.param_count() + 1),
        );
        assert_ne!(text, wrong, "replacement must hit the count field");
        std::fs::write(&manifest_path, wrong).unwrap();
        assert!(matches!(load_gnn(dir.path(), "model"), Err(GnnError::BadManifest(_))));
    }
}
