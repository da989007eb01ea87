//! Denoising quality (PSNR) and classification error.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::TripletDataset;
use crate::error::{Error, Result};
use crate::network::{Prediction, TriPathNet};
use crate::numerics::Matrix;

/// Returned when the images match exactly.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Peak signal-to-noise ratio in dB for pixels in [0, 1], from the mean
/// squared error over every pixel of every image.
pub fn psnr(reference: &Matrix, estimate: &Matrix) -> Result<f64> {
    if reference.shape() != estimate.shape() {
        return Err(Error::Shape {
            op: "psnr",
            left: reference.shape(),
            right: estimate.shape(),
        });
    }
    if reference.as_slice().is_empty() {
        return Err(Error::contract("PSNR of empty images"));
    }
    let mut sum = 0.0;
    for (i, (&a, &b)) in reference.as_slice().iter().zip(estimate.as_slice()).enumerate() {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            return Err(Error::contract(format!(
                "pixel {i} outside [0, 1]: reference {a}, estimate {b}"
            )));
        }
        sum += (a - b) * (a - b);
    }
    let mse = sum / reference.as_slice().len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((-10.0 * libm::log10(mse)).min(PSNR_CAP_DB))
}

/// Counts with rows indexed by true class and columns by predicted class.
pub fn confusion_matrix(truth: &[usize], predicted: &[usize], num_classes: usize) -> Result<Vec<Vec<usize>>> {
    if truth.len() != predicted.len() {
        return Err(Error::contract(format!(
            "{} labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut counts = vec![vec![0; num_classes]; num_classes];
    for (i, (&t, &p)) in truth.iter().zip(predicted).enumerate() {
        if t >= num_classes || p >= num_classes {
            return Err(Error::contract(format!(
                "row {i}: class {t} or {p} not below {num_classes}"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(counts)
}

/// Fraction of predictions that differ from the truth.
pub fn error_rate(truth: &[usize], predicted: &[usize]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::contract(format!(
            "{} labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::contract("error rate of an empty set"));
    }
    let wrong = truth.iter().zip(predicted).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Anything that maps noisy images to a reconstruction and class scores.
pub trait Predictor {
    fn predict(&self, noisy: &Matrix) -> Result<Prediction>;
}

impl Predictor for TriPathNet {
    fn predict(&self, noisy: &Matrix) -> Result<Prediction> {
        TriPathNet::predict(self, noisy)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    /// PSNR of the reconstruction against the clean images.
    pub psnr_db: f64,
    /// PSNR of the noisy input against the clean images.
    pub noisy_floor_db: f64,
    pub error_rate: f64,
    pub n: usize,
    pub confusion: Vec<Vec<usize>>,
}

/// Runs `model` on the noisy column of `data` and scores both outputs.
pub fn evaluate(model: &dyn Predictor, data: &TripletDataset) -> Result<(MetricsReport, Prediction)> {
    let prediction = model.predict(data.noisy())?;
    let report = report_for(&prediction, data)?;
    Ok((report, prediction))
}

/// Scores an existing prediction against `data`.
pub fn report_for(prediction: &Prediction, data: &TripletDataset) -> Result<MetricsReport> {
    let truth = data.labels();
    Ok(MetricsReport {
        psnr_db: psnr(data.clean(), &prediction.images)?,
        noisy_floor_db: psnr(data.clean(), data.noisy())?,
        error_rate: error_rate(&truth, &prediction.classes)?,
        n: data.len(),
        confusion: confusion_matrix(&truth, &prediction.classes, data.num_classes())?,
    })
}
