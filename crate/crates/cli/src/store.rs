//! On-disk caches under one root:
//!
//! ```text
//! <root>/mobius/mu-<limit>.bin
//! <root>/zeros/<character>/zeros.lzc
//! <root>/fields/<field>/field.txt, coefficients.csv
//! ```
//!
//! Files are written to a temporary name and renamed, so an interrupted run never
//! leaves a half-written cache behind. Unreadable or stale files are rebuilt.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use mobius_core::sieve::{field_coefficients, mobius_sieve, FieldCoefficients, MobiusTable};
use mobius_core::zeros::scan_zeros;
use mobius_core::{AbelianField, DirichletCharacter, PrecisionPolicy, ZeroCache, ZeroSource};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct CacheSummary {
    pub character: String,
    pub t_max: f64,
    pub zeros: usize,
    pub count_verified: bool,
    pub policy_fingerprint: String,
}

pub struct Caches {
    root: PathBuf,
    policy: PrecisionPolicy,
    zeros: Mutex<BTreeMap<String, Arc<ZeroCache>>>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

impl Caches {
    pub fn new(root: PathBuf, policy: PrecisionPolicy) -> Self {
        Caches { root, policy, zeros: Mutex::new(BTreeMap::new()) }
    }

    fn zero_path(&self, label: &str) -> PathBuf {
        self.root.join("zeros").join(label).join("zeros.lzc")
    }

    fn load_zeros(&self, chi: &DirichletCharacter, upto: f64) -> Option<ZeroCache> {
        let path = self.zero_path(chi.label());
        if !path.exists() {
            return None;
        }
        match ZeroCache::load(&path) {
            Ok(c) if c.character_label == chi.label() && c.is_valid_for(&self.policy) && c.count_verified && c.t_max >= upto => {
                Some(c)
            }
            Ok(c) => {
                log::info!("{}: cached zeros (to {}) do not cover {upto}; rescanning", chi.label(), c.t_max);
                None
            }
            Err(e) => {
                log::warn!("{}: ignoring unreadable cache: {e}", path.display());
                None
            }
        }
    }

    /// Caches handed out so far, by character label.
    pub fn used(&self) -> Vec<CacheSummary> {
        self.zeros
            .lock()
            .expect("zero caches")
            .values()
            .map(|c| CacheSummary {
                character: c.character_label.clone(),
                t_max: c.t_max,
                zeros: c.len(),
                count_verified: c.count_verified,
                policy_fingerprint: c.policy_fingerprint.clone(),
            })
            .collect()
    }

    /// Möbius table covering `limit`, reusing the smallest cached table that does.
    pub fn mobius(&self, limit: u64) -> anyhow::Result<MobiusTable> {
        let dir = self.root.join("mobius");
        let mut best: Option<u64> = None;
        if let Ok(entries) = fs::read_dir(&dir) {
            for e in entries.flatten() {
                let name = e.file_name();
                let Some(n) = name
                    .to_str()
                    .and_then(|s| s.strip_prefix("mu-"))
                    .and_then(|s| s.strip_suffix(".bin"))
                    .and_then(|s| s.parse::<u64>().ok())
                else {
                    continue;
                };
                if n >= limit && best.map_or(true, |b| n < b) {
                    best = Some(n);
                }
            }
        }
        if let Some(n) = best {
            let path = dir.join(format!("mu-{n}.bin"));
            match MobiusTable::load(&path) {
                Ok(t) if t.limit() == n => return Ok(t),
                Ok(_) => log::warn!("{}: limit does not match its name; rebuilding", path.display()),
                Err(e) => log::warn!("{}: {e}; rebuilding", path.display()),
            }
        }
        let table = mobius_sieve(limit)?;
        let mut bytes = Vec::new();
        table.write_cache(&mut bytes)?;
        write_atomic(&dir.join(format!("mu-{limit}.bin")), &bytes)?;
        Ok(table)
    }

    /// Field descriptor and coefficient table, written next to each other.
    pub fn field(&self, field: &AbelianField, limit: u64) -> anyhow::Result<FieldCoefficients> {
        let dir = self.root.join("fields").join(field.label());
        let desc = dir.join("field.txt");
        if let Ok(text) = fs::read_to_string(&desc) {
            match AbelianField::from_text(&text) {
                Ok(stored) if stored.characters() == field.characters() => {}
                Ok(_) => log::warn!("{}: describes a different field; overwriting", desc.display()),
                Err(e) => log::warn!("{}: {e}; overwriting", desc.display()),
            }
        }
        write_atomic(&desc, field.to_text().as_bytes())?;
        let coeffs = field_coefficients(field, limit)?;
        write_atomic(&dir.join("coefficients.csv"), coeffs.to_csv().as_bytes())?;
        Ok(coeffs)
    }
}

impl ZeroSource for Caches {
    fn zeros(&self, chi: &DirichletCharacter, upto: f64) -> mobius_core::Result<Arc<ZeroCache>> {
        if let Some(c) = self.zeros.lock().expect("zero caches").get(chi.label()) {
            if c.t_max >= upto && c.count_verified {
                return Ok(c.clone());
            }
        }
        let cache = match self.load_zeros(chi, upto) {
            Some(c) => c,
            None => {
                log::info!("{}: scanning zeros to {}", chi.label(), (upto * 1.25).ceil());
                let c = scan_zeros(chi, (upto * 1.25).ceil(), &self.policy)?;
                let mut bytes = Vec::new();
                c.write_to(&mut bytes)?;
                write_atomic(&self.zero_path(chi.label()), &bytes)?;
                c
            }
        };
        let cache = Arc::new(cache);
        self.zeros.lock().expect("zero caches").insert(chi.label().to_string(), cache.clone());
        Ok(cache)
    }
}
