//! Named initial densities.
//!
//! Every preset is sampled at cell centres and normalised to unit mass.
//! The random preset draws from one `ChaCha8Rng` stream seeded by `seed`,
//! coefficients in lexicographic order of the wave vector, cosine before sine.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Density, ScalarField, TorusGrid};

pub const PRESETS: [&str; 7] = [
    "uniform",
    "step",
    "bumps",
    "square-wave",
    "disk",
    "checkerboard",
    "random-band-limited",
];

/// Preset name plus its (optional) parameters; unused parameters are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumSpec {
    pub preset: String,
    /// Low / high levels of `step`, `disk`, `checkerboard`.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    /// Background level of `bumps`, `square-wave`, `random-band-limited`.
    pub base: Option<f64>,
    pub amplitude: Option<f64>,
    /// Frequency of `square-wave` / cells per side of `checkerboard` /
    /// maximal wave number of `random-band-limited`.
    pub freq: Option<u32>,
    pub radius: Option<f64>,
    pub width: Option<f64>,
    /// Flat list of bump centres, `dim` coordinates each.
    pub centers: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

impl DatumSpec {
    pub fn preset(name: &str) -> Self {
        Self {
            preset: name.to_owned(),
            lo: None,
            hi: None,
            base: None,
            amplitude: None,
            freq: None,
            radius: None,
            width: None,
            centers: None,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !PRESETS.contains(&self.preset.as_str()) {
            return Err(Error::UnknownPreset(self.preset.clone()));
        }
        let pos = |name: &str, v: Option<f64>| -> Result<()> {
            match v {
                Some(x) if !(x > 0.0 && x.is_finite()) => {
                    Err(Error::validation(format!("datum.{name}"), "must be positive"))
                }
                _ => Ok(()),
            }
        };
        pos("lo", self.lo)?;
        pos("hi", self.hi)?;
        pos("base", self.base)?;
        pos("radius", self.radius)?;
        pos("width", self.width)?;
        if let Some(a) = self.amplitude {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::validation("datum.amplitude", "must be finite and >= 0"));
            }
        }
        if self.freq == Some(0) {
            return Err(Error::validation("datum.freq", "must be positive"));
        }
        Ok(())
    }
}

/// A generated density with its recorded bounds `α = min`, `β = max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Datum {
    pub density: Density,
    pub alpha: f64,
    pub beta: f64,
}

impl Datum {
    pub fn kappa(&self) -> f64 {
        self.beta / self.alpha
    }
}

fn periodic(d: f64) -> f64 {
    let d = d.rem_euclid(1.0);
    d.min(1.0 - d)
}

pub fn make_datum(spec: &DatumSpec, grid: TorusGrid) -> Result<Datum> {
    spec.validate()?;
    let dim = grid.dim();
    let lo = spec.lo.unwrap_or(0.5);
    let hi = spec.hi.unwrap_or(1.5);
    let field = match spec.preset.as_str() {
        "uniform" => {
            let density = Density::uniform(grid);
            return Ok(Datum {
                density,
                alpha: 1.0,
                beta: 1.0,
            });
        }
        "step" => {
            let n = grid.n();
            let v = (0..grid.len())
                .map(|i| if grid.coords(i)[0] < n / 2 { hi } else { lo })
                .collect();
            ScalarField::new(grid, v)?
        }
        "square-wave" => {
            let base = spec.base.unwrap_or(0.5);
            let amp = spec.amplitude.unwrap_or(0.45);
            let f = spec.freq.unwrap_or(16) as f64;
            if amp >= base {
                return Err(Error::validation("datum.amplitude", "must stay below base"));
            }
            ScalarField::from_fn(grid, |x| base + amp * (2.0 * PI * f * x[0]).sin().signum())
        }
        "bumps" => {
            let base = spec.base.unwrap_or(0.5);
            let amp = spec.amplitude.unwrap_or(1.0);
            let w = spec.width.unwrap_or(0.05);
            let centers = spec.centers.clone().unwrap_or_else(|| match dim {
                1 => vec![0.3, 0.7],
                _ => vec![0.3, 0.5, 0.7, 0.5],
            });
            if centers.is_empty() || !centers.len().is_multiple_of(dim) {
                return Err(Error::validation("datum.centers", format!("need a multiple of {dim} coordinates")));
            }
            ScalarField::from_fn(grid, |x| {
                base + centers
                    .chunks(dim)
                    .map(|c| {
                        let r2: f64 = c.iter().zip(x).map(|(ci, xi)| periodic(xi - ci).powi(2)).sum();
                        amp * (-r2 / (2.0 * w * w)).exp()
                    })
                    .sum::<f64>()
            })
        }
        "disk" => {
            let r = spec.radius.unwrap_or(0.25);
            ScalarField::from_fn(grid, |x| {
                let r2: f64 = x[..dim].iter().map(|xi| (xi - 0.5).powi(2)).sum();
                if r2 < r * r {
                    hi
                } else {
                    lo
                }
            })
        }
        "checkerboard" => {
            let k = spec.freq.unwrap_or(4) as f64;
            ScalarField::from_fn(grid, |x| {
                let s: i64 = x[..dim].iter().map(|xi| (xi * k).floor() as i64).sum();
                if s % 2 == 0 {
                    hi
                } else {
                    lo
                }
            })
        }
        "random-band-limited" => {
            let base = spec.base.unwrap_or(1.0);
            let amp = spec.amplitude.unwrap_or(0.5);
            if amp >= base {
                return Err(Error::validation("datum.amplitude", "must stay below base"));
            }
            let v = band_limited(grid, spec.freq.unwrap_or(4) as i32, spec.seed.unwrap_or(0));
            v.map(|s| base + amp * s)
        }
        other => return Err(Error::UnknownPreset(other.to_owned())),
    };
    let density = Density::normalized(grid, field.into_values())?;
    let (alpha, beta) = density.minmax();
    Ok(Datum { density, alpha, beta })
}

/// Zero-mean random trigonometric polynomial with wave numbers `|k_d| ≤ kmax`,
/// scaled to `max |v| = 1` (identically zero if all draws vanish).
pub fn band_limited(grid: TorusGrid, kmax: i32, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k1range: Vec<i32> = if grid.dim() == 2 { (-kmax..=kmax).collect() } else { vec![0] };
    let mut modes = Vec::new();
    for k0 in 0..=kmax {
        for &k1 in &k1range {
            // one representative per ±k pair, skipping k = 0
            if k0 == 0 && k1 <= 0 {
                continue;
            }
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            modes.push((k0 as f64, k1 as f64, a, b));
        }
    }
    let v = ScalarField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|&(k0, k1, a, b)| {
                let ph = 2.0 * PI * (k0 * x[0] + k1 * x[1]);
                a * ph.cos() + b * ph.sin()
            })
            .sum()
    });
    let m = v.max_abs();
    if m > 0.0 {
        v.map(|s| s / m)
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_step() {
        let g = TorusGrid::new(2, 5).unwrap();
        let d = make_datum(&DatumSpec::preset("uniform"), g).unwrap();
        assert!(d.density.values().iter().all(|&v| v == 1.0));
        let g = TorusGrid::new(1, 8).unwrap();
        let mut s = DatumSpec::preset("step");
        s.lo = Some(0.5);
        s.hi = Some(1.5);
        let d = make_datum(&s, g).unwrap();
        assert_eq!(d.density.values(), &[1.5, 1.5, 1.5, 1.5, 0.5, 0.5, 0.5, 0.5]);
        assert_eq!(d.density.mass(), 1.0);
        assert_eq!((d.alpha, d.beta), (0.5, 1.5));
    }

    #[test]
    fn random_is_deterministic() {
        let g = TorusGrid::new(2, 16).unwrap();
        let mut s = DatumSpec::preset("random-band-limited");
        s.seed = Some(7);
        let a = make_datum(&s, g).unwrap();
        let b = make_datum(&s, g).unwrap();
        let bits = |d: &Datum| d.density.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        s.seed = Some(8);
        assert_ne!(bits(&a), bits(&make_datum(&s, g).unwrap()));
        assert!(a.alpha > 0.0);
    }

    #[test]
    fn all_presets_are_valid_densities() {
        for dim in [1, 2] {
            let g = TorusGrid::new(dim, 32).unwrap();
            for p in PRESETS {
                let d = make_datum(&DatumSpec::preset(p), g).unwrap();
                assert!((d.density.mass() - 1.0).abs() < 1e-12 && d.alpha > 0.0, "{p}");
            }
        }
    }

    #[test]
    fn square_wave_levels() {
        let g = TorusGrid::new(1, 256).unwrap();
        let d = make_datum(&DatumSpec::preset("square-wave"), g).unwrap();
        assert!((d.alpha - 0.1).abs() < 1e-12 && (d.beta - 1.9).abs() < 1e-12);
        assert!((d.kappa() - 19.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_preset() {
        let g = TorusGrid::new(1, 8).unwrap();
        assert!(matches!(make_datum(&DatumSpec::preset("spiral"), g), Err(Error::UnknownPreset(_))));
    }
}
