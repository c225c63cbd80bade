//! Per-subcommand key schemas and the merged run configuration.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use lightlike::gates::{parse_key_values, Arrangement, GateSpec, ModelParams};
use lightlike::{Error, Result};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

const MODEL_KEYS: [Key; 8] = [
    key("model", "hrm", "gate model: xyzc, hrm, rpm, 3pm, z2coe, du, localized"),
    key("q", "2", "local dimension"),
    key("seed", "0", "gate seed"),
    key("arrangement", "invariant", "invariant or random (one gate per space-time position)"),
    key("ax", "0.3", "XYZ coupling a_x"),
    key("ay", "0.4", "XYZ coupling a_y"),
    key("az", "0.5", "XYZ coupling a_z"),
    key("eps", "1.0", "random-phase variance"),
];

pub struct Subcommand {
    pub name: &'static str,
    pub about: &'static str,
    pub uses_model: bool,
    pub keys: &'static [Key],
}

pub const SUBCOMMANDS: &[Subcommand] = &[
    Subcommand {
        name: "otoc",
        about: "OTOC grid from the left/right generators and brute-force evolution",
        uses_model: true,
        keys: &[
            key("w_max", "3", "largest w"),
            key("tau_max", "3", "largest tau"),
            key("methods", "left,right,bruteforce", "comma list of left, right, bruteforce"),
            key("ensemble", "1", "number of consecutive seeds to average over"),
            key("sigma", "default", "generalized Pauli index mu = j + q k of the origin probe"),
            key("nu", "default", "generalized Pauli index of the moving probe"),
        ],
    },
    Subcommand {
        name: "lsva",
        about: "leading-singular-value approximation against the exact OTOC",
        uses_model: true,
        keys: &[
            key("w_max", "4", "largest w"),
            key("tau_max", "20", "largest tau"),
            key("right_tau_max", "3", "also run the right-moving LSVA for tau up to this (w >= 3)"),
        ],
    },
    Subcommand {
        name: "variational",
        about: "product-ansatz singular vectors against the exact triplet",
        uses_model: true,
        keys: &[
            key("w", "3", "width"),
            key("tau_max", "12", "largest tau"),
            key("sweeps", "1000", "maximum alternating sweeps"),
        ],
    },
    Subcommand {
        name: "spectrum",
        about: "dense generator spectra, clusters and the multiplicity recursion",
        uses_model: true,
        keys: &[
            key("w_max", "3", "largest w"),
            key("mode", "t", "t or f"),
            key("direction", "left", "left or right"),
            key("delta", "1e-7", "cluster radius"),
        ],
    },
    Subcommand {
        name: "tailfit",
        about: "fit ln|C| = phi ln tau + tau ln z2 + c on late-time windows",
        uses_model: true,
        keys: &[
            key("model", "3pm", "gate model"),
            key("w", "5", "width"),
            key("tau_max", "200", "last tau of every window"),
            key("tau_start", "41,81,121", "comma list of window starts"),
        ],
    },
    Subcommand {
        name: "avg-hrm",
        about: "ensemble-averaged Haar circuit: spectrum, leading singular value and ridge",
        uses_model: false,
        keys: &[
            key("q", "2", "local dimension"),
            key("w", "30", "width"),
            key("tau_max", "160", "largest tau"),
        ],
    },
    Subcommand {
        name: "special",
        about: "dual-unitary and localized circuits against their closed forms",
        uses_model: false,
        keys: &[
            key("q", "2", "local dimension (du needs 2)"),
            key("seed", "0", "gate seed"),
            key("w_max", "4", "largest w"),
            key("tau_max", "6", "largest tau"),
        ],
    },
    Subcommand {
        name: "levelstats",
        about: "Floquet level-spacing statistics in one symmetry sector",
        uses_model: true,
        keys: &[
            key("model", "3pm", "gate model"),
            key("l", "12", "chain length (even)"),
            key("seeds", "5", "number of gate realizations pooled"),
            key("momentum", "1", "momentum label m, k = 2 pi m / (L/2)"),
            key("z2", "none", "none, even or odd (qubits only)"),
            key("reference", "cue", "cue or coe"),
            key("power", "2", "reference ensemble power"),
            key("draws", "6", "reference matrices drawn"),
            key("bin", "0.1", "histogram bin width"),
            key("s_max", "4", "histogram range"),
        ],
    },
    Subcommand {
        name: "verify",
        about: "triple equality, fixed points, norm bound and reducibility",
        uses_model: false,
        keys: &[
            key("q", "2", "local dimension"),
            key("w_max", "3", "largest w"),
            key("seed", "1", "gate seed"),
        ],
    },
];

pub fn find(name: &str) -> Option<&'static Subcommand> {
    SUBCOMMANDS.iter().find(|s| s.name == name)
}

impl Subcommand {
    /// Model keys first, then the subcommand's own; later entries win.
    pub fn all_keys(&self) -> Vec<Key> {
        let mut out: Vec<Key> = Vec::new();
        let base: &[Key] = if self.uses_model { &MODEL_KEYS } else { &[] };
        for k in base.iter().chain(self.keys) {
            if let Some(slot) = out.iter_mut().find(|o| o.name == k.name) {
                *slot = *k;
            } else {
                out.push(*k);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub subcommand: &'static str,
    values: BTreeMap<&'static str, String>,
}

impl Settings {
    /// Defaults, then the config file, then command-line values.
    pub fn merge(sub: &'static Subcommand, config: Option<&str>, cli: &[(&'static str, String)]) -> Result<Self> {
        let keys = sub.all_keys();
        let mut values: BTreeMap<&'static str, String> = keys.iter().map(|k| (k.name, k.default.to_string())).collect();
        if let Some(text) = config {
            for (k, v) in parse_key_values(text)? {
                let k = k.replace('-', "_");
                let slot = keys.iter().find(|key| key.name == k).ok_or_else(|| {
                    Error::Config(format!("unknown key '{k}' for subcommand '{}'", sub.name))
                })?;
                values.insert(slot.name, v);
            }
        }
        for (k, v) in cli {
            values.insert(k, v.clone());
        }
        Ok(Self {
            subcommand: sub.name,
            values,
        })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.raw(key);
        raw.trim()
            .parse()
            .map_err(|e: T::Err| {
                let e = e.to_string();
                let e = e.trim_start_matches("config error: ");
                Error::Config(format!("bad value '{raw}' for '{key}': {e}"))
            })
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.raw(key)
            .split(',')
            .map(|s| s.trim().to_ascii_lowercase())
            .filter(|s| !s.is_empty())
            .collect()
    }

    pub fn spec(&self) -> Result<GateSpec> {
        let spec = GateSpec {
            model: self.get("model")?,
            q: self.get("q")?,
            params: ModelParams {
                a: [self.get("ax")?, self.get("ay")?, self.get("az")?],
                epsilon: self.get("eps")?,
            },
            seed: self.get("seed")?,
            arrangement: self.get::<Arrangement>("arrangement")?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// SHA-256 over the subcommand and the sorted merged values.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.subcommand.as_bytes());
        for (k, v) in &self.values {
            h.update(format!("\n{k}={v}").as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
