use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::gaussian::{Gaussian, GaussianJson};
use crate::error::{Error, Result};

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::invalid("mixture needs at least one component"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid(
            "mixing weights must be finite and non-negative",
        ));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "mixing weights sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// Free parameters of a `K`-component mixture over `D` dimensions in `P` frames.
pub fn mixture_param_count(k: usize, d: usize, p: usize) -> usize {
    k - 1 + k * p * (d + d * (d + 1) / 2)
}

/// Gaussian mixture model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MixtureJson", try_from = "MixtureJson")]
pub struct Gmm {
    weights: Vec<f64>,
    components: Vec<Gaussian>,
}

impl Gmm {
    pub fn new(weights: Vec<f64>, components: Vec<Gaussian>) -> Result<Self> {
        check_weights(&weights)?;
        if components.len() != weights.len() {
            return Err(Error::invalid("one mixing weight per component required"));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::invalid("components differ in dimension"));
        }
        Ok(Self {
            weights,
            components,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn param_count(&self) -> usize {
        mixture_param_count(self.k(), self.dim(), 1)
    }

    /// Total log-likelihood of the samples.
    pub fn log_likelihood(&self, data: &[DVector<f64>]) -> f64 {
        let dens: Vec<_> = self.components.iter().map(Gaussian::density).collect();
        let log_w: Vec<f64> = self.weights.iter().map(|w| w.ln()).collect();
        data.iter()
            .map(|x| log_sum_exp(dens.iter().zip(&log_w).map(|(d, lw)| lw + d.log_pdf(x))))
            .sum()
    }
}

/// Mixture fitted jointly in `P` reference frames with shared weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MixtureJson", try_from = "MixtureJson")]
pub struct TpGmm {
    weights: Vec<f64>,
    /// `frames[j][i]` is component `i` expressed in frame `j`.
    frames: Vec<Vec<Gaussian>>,
}

impl TpGmm {
    pub fn new(weights: Vec<f64>, frames: Vec<Vec<Gaussian>>) -> Result<Self> {
        check_weights(&weights)?;
        if frames.is_empty() {
            return Err(Error::invalid("need at least one frame"));
        }
        let d = frames[0].first().map(Gaussian::dim).unwrap_or(0);
        for f in &frames {
            if f.len() != weights.len() || f.iter().any(|c| c.dim() != d) {
                return Err(Error::invalid(
                    "every frame needs K components of equal dimension",
                ));
            }
        }
        Ok(Self { weights, frames })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn frames(&self) -> &[Vec<Gaussian>] {
        &self.frames
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn p(&self) -> usize {
        self.frames.len()
    }

    pub fn dim(&self) -> usize {
        self.frames[0][0].dim()
    }

    pub fn param_count(&self) -> usize {
        mixture_param_count(self.k(), self.dim(), self.p())
    }

    /// The single-frame mixture of frame `j`.
    pub fn frame_gmm(&self, j: usize) -> Result<Gmm> {
        let f = self
            .frames
            .get(j)
            .ok_or_else(|| Error::invalid(format!("no frame {j}")))?;
        Gmm::new(self.weights.clone(), f.clone())
    }
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Serialize, Deserialize)]
struct MixtureJson {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "D")]
    d: usize,
    #[serde(rename = "P")]
    p: usize,
    pi: Vec<f64>,
    frames: Vec<Vec<GaussianJson>>,
}

impl MixtureJson {
    fn parse(self) -> Result<(Vec<f64>, Vec<Vec<Gaussian>>)> {
        if self.pi.len() != self.k || self.frames.len() != self.p {
            return Err(Error::invalid("K or P does not match the stored arrays"));
        }
        let frames = self
            .frames
            .into_iter()
            .map(|f| {
                f.into_iter()
                    .map(Gaussian::try_from)
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if frames.iter().flatten().any(|g| g.dim() != self.d) {
            return Err(Error::invalid("component dimension does not match D"));
        }
        Ok((self.pi, frames))
    }
}

impl From<Gmm> for MixtureJson {
    fn from(g: Gmm) -> Self {
        Self {
            k: g.k(),
            d: g.dim(),
            p: 1,
            frames: vec![g.components.iter().map(GaussianJson::from).collect()],
            pi: g.weights,
        }
    }
}

impl TryFrom<MixtureJson> for Gmm {
    type Error = Error;

    fn try_from(j: MixtureJson) -> Result<Self> {
        if j.p != 1 {
            return Err(Error::invalid(format!(
                "a GMM has one frame, got P = {}",
                j.p
            )));
        }
        let (pi, mut frames) = j.parse()?;
        Gmm::new(pi, frames.remove(0))
    }
}

impl From<TpGmm> for MixtureJson {
    fn from(g: TpGmm) -> Self {
        Self {
            k: g.k(),
            d: g.dim(),
            p: g.p(),
            frames: g
                .frames
                .iter()
                .map(|f| f.iter().map(GaussianJson::from).collect())
                .collect(),
            pi: g.weights,
        }
    }
}

impl TryFrom<MixtureJson> for TpGmm {
    type Error = Error;

    fn try_from(j: MixtureJson) -> Result<Self> {
        let (pi, frames) = j.parse()?;
        TpGmm::new(pi, frames)
    }
}
