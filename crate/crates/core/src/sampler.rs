//! Poisson impurity configurations on a Dirichlet box.
//!
//! A realization is drawn in two steps: the atom count `m ~ Poisson(νL)`,
//! then `m` independent uniform positions in the open box `(-L/2, L/2)`,
//! sorted. Every realization is addressed by `(seed, index)`; the index
//! selects an independent ChaCha stream so parallel sweeps reproduce
//! bit-for-bit whatever the scheduling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

/// Physical parameters of one thermodynamic sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    /// Poisson intensity ν (atoms per unit length).
    pub intensity: f64,
    /// Delta strength γ.
    pub strength: f64,
    /// Inverse temperature β.
    pub beta: f64,
    /// Particle density ρ.
    pub density: f64,
    /// Particle number N.
    pub particles: u64,
}

impl ModelParameters {
    pub fn new(intensity: f64, strength: f64, beta: f64, density: f64, particles: u64) -> Result<Self> {
        let p = Self {
            intensity,
            strength,
            beta,
            density,
            particles,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("intensity", self.intensity)?;
        require_positive("strength", self.strength)?;
        require_positive("beta", self.beta)?;
        require_positive("density", self.density)?;
        if self.particles == 0 {
            return Err(Error::param("particles", "must be at least 1"));
        }
        Ok(())
    }

    /// Box length `L_N = N / ρ`.
    pub fn box_length(&self) -> f64 {
        self.particles as f64 / self.density
    }

    /// Same parameters at a different particle number.
    pub fn with_particles(&self, particles: u64) -> Self {
        Self { particles, ..*self }
    }

    pub fn with_density(&self, density: f64) -> Self {
        Self { density, ..*self }
    }
}

/// Reproducibility label of a sampled configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTag {
    pub seed: u64,
    pub stream: u64,
}

/// Sorted impurity positions inside `(-L/2, L/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpurityConfiguration {
    box_length: f64,
    atoms: Vec<f64>,
    #[serde(default, skip_serializing)]
    seed_tag: Option<SeedTag>,
}

impl ImpurityConfiguration {
    /// Atom-free box.
    pub fn empty(box_length: f64) -> Result<Self> {
        require_positive("length", box_length)?;
        Ok(Self {
            box_length,
            atoms: Vec::new(),
            seed_tag: None,
        })
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn seed_tag(&self) -> Option<SeedTag> {
        self.seed_tag
    }

    pub fn left_wall(&self) -> f64 {
        -0.5 * self.box_length
    }

    pub fn right_wall(&self) -> f64 {
        0.5 * self.box_length
    }

    /// Gap lengths `(ℓ_0, …, ℓ_m)` between consecutive walls and atoms.
    pub fn gaps(&self) -> Vec<f64> {
        self.gap_iter().collect()
    }

    /// Iterator over the gap lengths, allocation free.
    pub fn gap_iter(&self) -> impl Iterator<Item = f64> + '_ {
        let half = 0.5 * self.box_length;
        let mut prev = -half;
        self.atoms
            .iter()
            .copied()
            .chain(std::iter::once(half))
            .map(move |x| {
                let g = x - prev;
                prev = x;
                g
            })
    }

    /// Sub-configuration on `[lo, hi]` (box relative coordinates are kept):
    /// atoms strictly inside, walls at `lo` and `hi`.
    pub(crate) fn atoms_between(&self, lo: f64, hi: f64) -> &[f64] {
        let start = self.atoms.partition_point(|&a| a <= lo);
        let end = self.atoms.partition_point(|&a| a < hi);
        &self.atoms[start..end.max(start)]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("configuration is always serializable")
    }

    /// Parses and re-validates a configuration written by [`Self::to_json`].
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            box_length: f64,
            atoms: Vec<f64>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| Error::Validation(e.to_string()))?;
        configuration_from_points(&raw.atoms, raw.box_length)
    }
}

/// Validates user supplied impurity positions.
///
/// Points are sorted; boundary, out-of-box, non-finite and duplicate points
/// are rejected. Coincident atoms are never merged since that would change
/// the effective strength.
pub fn configuration_from_points(points: &[f64], length: f64) -> Result<ImpurityConfiguration> {
    require_positive("length", length)?;
    let half = 0.5 * length;
    let mut atoms = points.to_vec();
    for &a in &atoms {
        if !a.is_finite() || a <= -half || a >= half {
            return Err(Error::Validation(format!(
                "atom {a} not strictly inside (-{half}, {half})"
            )));
        }
    }
    atoms.sort_by(f64::total_cmp);
    if let Some(w) = atoms.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Validation(format!("duplicate atom at {}", w[0])));
    }
    Ok(ImpurityConfiguration {
        box_length: length,
        atoms,
        seed_tag: None,
    })
}

/// RNG for realization `stream` of experiment `seed`.
pub fn realization_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws one Poisson configuration on stream 0 of `seed`.
pub fn sample_configuration(length: f64, intensity: f64, seed: u64) -> Result<ImpurityConfiguration> {
    sample_realization(length, intensity, seed, 0)
}

/// Draws realization `index` of the experiment identified by `seed`.
pub fn sample_realization(
    length: f64,
    intensity: f64,
    seed: u64,
    index: u64,
) -> Result<ImpurityConfiguration> {
    require_positive("length", length)?;
    require_positive("intensity", intensity)?;
    let mut rng = realization_rng(seed, index);
    let mean = intensity * length;
    let count = Poisson::new(mean)
        .map_err(|e| Error::param("intensity", e.to_string()))?
        .sample(&mut rng) as usize;
    let half = 0.5 * length;
    let mut atoms = Vec::with_capacity(count);
    while atoms.len() < count {
        let x = -half + length * rng.random::<f64>();
        // open interval: the left wall itself has probability 2^-53
        if x > -half && x < half {
            atoms.push(x);
        }
    }
    atoms.sort_by(f64::total_cmp);
    // Continuous draws: an exact tie is a 2^-100 event, redraw the stream tail.
    atoms.dedup();
    while atoms.len() < count {
        let x = -half + length * rng.random::<f64>();
        if x > -half && x < half && atoms.binary_search_by(|a| a.total_cmp(&x)).is_err() {
            let at = atoms.partition_point(|&a| a < x);
            atoms.insert(at, x);
        }
    }
    Ok(ImpurityConfiguration {
        box_length: length,
        atoms,
        seed_tag: Some(SeedTag { seed, stream: index }),
    })
}
