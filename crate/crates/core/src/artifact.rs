//! Checksummed JSON documents: the persisted Pekar solution, derived reports
//! and the run manifest.
//!
//! Every document is a container `{format, version, checksum, payload}` whose
//! checksum is the SHA-256 of the payload's exact serialized text. Loading
//! verifies the format tag, refuses versions newer than this build and
//! recomputes the checksum before anything is deserialized. A Pekar artifact
//! stores the converged self-consistent potential; loading rebuilds the
//! solution from it and checks the rebuilt state against the stored one.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::pekar_scf::{solution_from_potential, PekarSolution, ScfConfig, Units};
use crate::radial_core::{build_grid, GridScheme};
use crate::{Error, Result};

/// Container version written by this build.
pub const FORMAT_VERSION: u32 = 1;

/// Format tag of a persisted Pekar solution.
pub const PEKAR_FORMAT: &str = "polaron-pekar";

/// Largest relative disagreement tolerated between a stored and a rebuilt
/// solution.
pub const REBUILD_TOLERANCE: f64 = 1e-9;

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize, Deserialize)]
struct Container<'a> {
    format: String,
    version: u32,
    checksum: String,
    #[serde(borrow)]
    payload: &'a RawValue,
}

/// Serialize `payload` into a checksummed container; returns the text and the
/// checksum.
pub fn encode_document<T: Serialize>(format: &str, payload: &T) -> Result<(String, String)> {
    let body = serde_json::to_string(payload)?;
    let checksum = sha256_hex(body.as_bytes());
    let raw = RawValue::from_string(body)?;
    let c = Container { format: format.into(), version: FORMAT_VERSION, checksum: checksum.clone(), payload: &raw };
    Ok((serde_json::to_string_pretty(&c)?, checksum))
}

/// Verify and decode a container; returns the payload and its checksum.
pub fn decode_document<T: DeserializeOwned>(format: &str, text: &str) -> Result<(T, String)> {
    let c: Container = serde_json::from_str(text)?;
    if c.format != format {
        return Err(Error::Provenance(format!("expected a '{format}' document, found '{}'", c.format)));
    }
    if c.version > FORMAT_VERSION {
        return Err(Error::Provenance(format!(
            "document version {} is newer than supported version {FORMAT_VERSION}",
            c.version
        )));
    }
    let actual = sha256_hex(c.payload.get().as_bytes());
    if actual != c.checksum {
        return Err(Error::Provenance(format!("checksum mismatch: recorded {}, computed {actual}", c.checksum)));
    }
    Ok((serde_json::from_str(c.payload.get())?, actual))
}

/// Write a checksummed document to `path`; returns the checksum.
pub fn write_document<T: Serialize>(path: &Path, format: &str, payload: &T) -> Result<String> {
    let (text, checksum) = encode_document(format, payload)?;
    std::fs::write(path, text)?;
    Ok(checksum)
}

/// Read and verify a checksummed document.
pub fn read_document<T: DeserializeOwned>(path: &Path, format: &str) -> Result<(T, String)> {
    decode_document(format, &std::fs::read_to_string(path)?)
}

/// Radial grid parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Node count.
    pub n: usize,
    /// Outer radius.
    pub r_max: f64,
    /// Node placement.
    pub scheme: GridScheme,
}

/// Scalar constants of a Pekar solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PekarConstants {
    /// `e^Pek`.
    pub e_pek: f64,
    /// `λ^Pek`.
    pub lambda_pek: f64,
    /// `‖∇ψ‖²`.
    pub kinetic: f64,
    /// `‖φ‖²`.
    pub phi_norm_sq: f64,
    /// `‖∇φ‖²`.
    pub grad_phi_sq: f64,
    /// `‖Δφ‖²`.
    pub laplacian_phi_sq: f64,
    /// `M^LP`.
    pub m_lp: f64,
    /// `‖∇φ‖²/6`.
    pub lambda_gauss: f64,
}

impl PekarConstants {
    /// Constants of a solution.
    pub fn of(sol: &PekarSolution) -> Self {
        Self {
            e_pek: sol.e_pek,
            lambda_pek: sol.lambda_pek,
            kinetic: sol.kinetic,
            phi_norm_sq: sol.phi_norm_sq,
            grad_phi_sq: sol.grad_phi_sq,
            laplacian_phi_sq: sol.laplacian_phi_sq,
            m_lp: sol.m_lp,
            lambda_gauss: sol.lambda_gauss,
        }
    }

    fn as_array(&self) -> [f64; 8] {
        [
            self.e_pek,
            self.lambda_pek,
            self.kinetic,
            self.phi_norm_sq,
            self.grad_phi_sq,
            self.laplacian_phi_sq,
            self.m_lp,
            self.lambda_gauss,
        ]
    }
}

/// Serialized content of a Pekar artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PekarPayload {
    /// Units.
    pub units: Units,
    /// Electron grid.
    pub grid: GridSpec,
    /// SCF settings of the run.
    pub scf: ScfConfig,
    /// Converged self-consistent input potential.
    pub scf_potential: Vec<f64>,
    /// `ψ` on the grid.
    pub psi: Vec<f64>,
    /// `φ` on the grid.
    pub phi: Vec<f64>,
    /// `V^φ` on the grid.
    pub v_eff: Vec<f64>,
    /// Scalar constants.
    pub constants: PekarConstants,
    /// SCF iterations.
    pub iterations: usize,
    /// Final residual.
    pub residual: f64,
    /// Residual history.
    pub history: Vec<f64>,
}

impl PekarPayload {
    /// Capture a solution.
    pub fn of(sol: &PekarSolution, scf: &ScfConfig) -> Self {
        Self {
            units: sol.units,
            grid: GridSpec { n: sol.grid.n, r_max: sol.grid.r_max, scheme: sol.grid.scheme },
            scf: *scf,
            scf_potential: sol.scf_potential.clone(),
            psi: sol.psi.values.clone(),
            phi: sol.phi.values.clone(),
            v_eff: sol.v_eff.values.clone(),
            constants: PekarConstants::of(sol),
            iterations: sol.iterations,
            residual: sol.residual,
            history: sol.history.clone(),
        }
    }

    /// Rebuild the solution and check it against the stored arrays and
    /// constants.
    pub fn rebuild(&self) -> Result<PekarSolution> {
        let grid = build_grid(self.grid.n, self.grid.r_max, self.grid.scheme)?;
        if self.scf_potential.len() != grid.n {
            return Err(Error::Provenance(format!(
                "stored potential has {} values for a grid of {}",
                self.scf_potential.len(),
                grid.n
            )));
        }
        let sol = solution_from_potential(
            &grid,
            &self.units,
            self.scf_potential.clone(),
            self.iterations,
            self.residual,
            self.history.clone(),
        )?;
        let rel = |a: &[f64], b: &[f64]| {
            let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            if a.len() != b.len() {
                return f64::INFINITY;
            }
            a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
        };
        let checks = [
            ("psi", rel(&self.psi, &sol.psi.values)),
            ("phi", rel(&self.phi, &sol.phi.values)),
            ("v_eff", rel(&self.v_eff, &sol.v_eff.values)),
            ("constants", rel(&self.constants.as_array(), &PekarConstants::of(&sol).as_array())),
        ];
        for (name, d) in checks {
            if !(d <= REBUILD_TOLERANCE) {
                return Err(Error::Provenance(format!("rebuilt {name} differs from the stored values by {d:.3e}")));
            }
        }
        Ok(sol)
    }
}

/// A loaded Pekar artifact.
#[derive(Clone, Debug)]
pub struct PekarArtifact {
    /// The rebuilt solution.
    pub solution: PekarSolution,
    /// SCF settings it was produced with.
    pub scf: ScfConfig,
    /// Payload checksum.
    pub checksum: String,
}

/// Persist a solution; returns the checksum.
pub fn save_pekar(path: &Path, sol: &PekarSolution, scf: &ScfConfig) -> Result<String> {
    write_document(path, PEKAR_FORMAT, &PekarPayload::of(sol, scf))
}

/// Load, verify and rebuild a persisted solution.
pub fn load_pekar(path: &Path) -> Result<PekarArtifact> {
    let (payload, checksum): (PekarPayload, String) = read_document(path, PEKAR_FORMAT)?;
    let solution = payload.rebuild()?;
    Ok(PekarArtifact { solution, scf: payload.scf, checksum })
}

/// One emitted file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the manifest.
    pub path: PathBuf,
    /// SHA-256 of the file bytes.
    pub sha256: String,
    /// Size in bytes.
    pub bytes: u64,
}

/// The list of files a command produced, tied to the source artifact.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Checksum of the Pekar artifact the outputs derive from.
    pub source_checksum: String,
    /// Producing command.
    pub command: String,
    /// Emitted files.
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    /// Empty manifest for a command.
    pub fn new(command: &str, source_checksum: &str) -> Self {
        Self { source_checksum: source_checksum.into(), command: command.into(), files: Vec::new() }
    }

    /// Record a file located under `dir`.
    pub fn add(&mut self, dir: &Path, name: &str) -> Result<()> {
        let bytes = std::fs::read(dir.join(name))?;
        self.files.push(ManifestEntry { path: name.into(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    /// Recompute every file checksum; returns the mismatching paths.
    pub fn verify(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut bad = Vec::new();
        for e in &self.files {
            let bytes = std::fs::read(dir.join(&e.path))?;
            if sha256_hex(&bytes) != e.sha256 {
                bad.push(e.path.clone());
            }
        }
        Ok(bad)
    }

    /// File name of the manifest, `manifest_<command>.json`.
    pub fn file_name(&self) -> String {
        format!("manifest_{}.json", self.command)
    }

    /// Write the manifest into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(self.file_name()), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pekar_scf::solve_pekar;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Sample {
        x: f64,
        v: Vec<f64>,
    }

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("polaron-artifact-{}-{name}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn document_round_trip_preserves_bits() {
        let s = Sample { x: 0.1 + 0.2, v: vec![std::f64::consts::PI, -1e-300, 1.0 / 3.0] };
        let (text, sum) = encode_document("sample", &s).unwrap();
        let (back, sum2): (Sample, String) = decode_document("sample", &text).unwrap();
        assert_eq!(back, s);
        assert_eq!(sum, sum2);
    }

    #[test]
    fn tampering_is_detected() {
        let s = Sample { x: 1.5, v: vec![2.0] };
        let (text, _) = encode_document("sample", &s).unwrap();
        let bad = text.replace("1.5", "1.6");
        assert!(matches!(decode_document::<Sample>("sample", &bad), Err(Error::Provenance(_))));
        assert!(matches!(decode_document::<Sample>("other", &text), Err(Error::Provenance(_))));
        let newer = text.replace("\"version\": 1", "\"version\": 99");
        assert!(matches!(decode_document::<Sample>("sample", &newer), Err(Error::Provenance(_))));
    }

    #[test]
    fn pekar_artifact_rebuilds_identically() {
        let grid = build_grid(400, 30.0, GridScheme::Uniform).unwrap();
        let cfg = ScfConfig::default();
        let sol = solve_pekar(&grid, &cfg).unwrap();
        let dir = tmp("pekar");
        let path = dir.join("pekar.json");
        let sum = save_pekar(&path, &sol, &cfg).unwrap();
        let art = load_pekar(&path).unwrap();
        assert_eq!(art.checksum, sum);
        assert_eq!(art.solution.e_pek, sol.e_pek);
        assert_eq!(art.solution.psi.values, sol.psi.values);

        let mut m = Manifest::new("solve", &sum);
        m.add(&dir, "pekar.json").unwrap();
        assert!(m.verify(&dir).unwrap().is_empty());
        let text = std::fs::read_to_string(&path).unwrap();
        let start = text.find("\"e_pek\":").unwrap();
        let idx = start + text[start..].find(|c: char| c.is_ascii_digit() && c != '0').unwrap();
        let mut tampered = text.clone();
        tampered.replace_range(idx..idx + 1, if &text[idx..idx + 1] == "5" { "6" } else { "5" });
        std::fs::write(&path, tampered).unwrap();
        assert!(matches!(load_pekar(&path), Err(Error::Provenance(_))));
        assert_eq!(m.verify(&dir).unwrap(), vec![PathBuf::from("pekar.json")]);
        std::fs::remove_dir_all(&dir).ok();
    }
}
