//! In-memory datasets: labelled images and (noisy, clean, label) triplets.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// N images of `width * height` pixels in [0, 1] with class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageDataset {
    images: Matrix,
    labels: Vec<usize>,
    width: usize,
    height: usize,
    num_classes: usize,
}

impl ImageDataset {
    pub fn new(images: Matrix, labels: Vec<usize>, width: usize, height: usize, num_classes: usize) -> Result<Self> {
        if images.cols() != width * height {
            return Err(Error::contract(format!(
                "images have {} columns but {width}x{height} pixels",
                images.cols()
            )));
        }
        if images.rows() != labels.len() {
            return Err(Error::contract(format!(
                "{} images but {} labels",
                images.rows(),
                labels.len()
            )));
        }
        if let Some(p) = images.as_slice().iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::contract(format!(
                "pixel {} of image {} is outside [0, 1]",
                p % images.cols().max(1),
                p / images.cols().max(1)
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l >= num_classes) {
            return Err(Error::contract(format!(
                "label {} at row {i} is not below {num_classes}",
                labels[i]
            )));
        }
        Ok(ImageDataset {
            images,
            labels,
            width,
            height,
            num_classes,
        })
    }

    pub fn images(&self) -> &Matrix {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First `n` examples (or all, if fewer).
    pub fn take(&self, n: usize) -> ImageDataset {
        let n = n.min(self.len());
        ImageDataset {
            images: self.images.slice_rows(0..n),
            labels: self.labels[..n].to_vec(),
            ..*self
        }
    }

    /// Pixels at or above 0.5 become 1, the rest 0.
    pub fn binarized(&self) -> ImageDataset {
        ImageDataset {
            images: self.images.map(|p| if p >= 0.5 { 1.0 } else { 0.0 }),
            labels: self.labels.clone(),
            ..*self
        }
    }

    /// Repeats every example `factor` times in place: row `i * factor + j`
    /// is copy `j` of example `i`.
    pub fn replicate(&self, factor: usize) -> ImageDataset {
        let indices: Vec<usize> = (0..self.len())
            .flat_map(|i| core::iter::repeat(i).take(factor))
            .collect();
        self.select(&indices).expect("indices are in range")
    }
}

/// Aligned noisy inputs, clean targets and one-hot labels.
#[derive(Clone, Debug, PartialEq)]
pub struct TripletDataset {
    clean: Matrix,
    noisy: Matrix,
    labels_onehot: Matrix,
    width: usize,
    height: usize,
}

impl TripletDataset {
    pub fn new(clean: Matrix, noisy: Matrix, labels_onehot: Matrix, width: usize, height: usize) -> Result<Self> {
        let n = clean.rows();
        if noisy.rows() != n || labels_onehot.rows() != n {
            return Err(Error::contract(format!(
                "row counts differ: clean {n}, noisy {}, labels {}",
                noisy.rows(),
                labels_onehot.rows()
            )));
        }
        if clean.cols() != width * height || noisy.cols() != width * height {
            return Err(Error::Shape {
                op: "triplets",
                left: clean.shape(),
                right: noisy.shape(),
            });
        }
        for r in 0..n {
            let row = labels_onehot.row(r);
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(Error::contract(format!("label row {r} is not one-hot")));
            }
        }
        Ok(TripletDataset {
            clean,
            noisy,
            labels_onehot,
            width,
            height,
        })
    }

    pub fn clean(&self) -> &Matrix {
        &self.clean
    }

    pub fn noisy(&self) -> &Matrix {
        &self.noisy
    }

    pub fn labels_onehot(&self) -> &Matrix {
        &self.labels_onehot
    }

    /// Class indices recovered from the one-hot rows.
    pub fn labels(&self) -> Vec<usize> {
        self.labels_onehot.argmax_rows()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn input_dim(&self) -> usize {
        self.noisy.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.labels_onehot.cols()
    }

    pub fn len(&self) -> usize {
        self.clean.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Contiguous block of examples.
    pub fn slice(&self, range: core::ops::Range<usize>) -> TripletDataset {
        TripletDataset {
            clean: self.clean.slice_rows(range.clone()),
            noisy: self.noisy.slice_rows(range.clone()),
            labels_onehot: self.labels_onehot.slice_rows(range),
            width: self.width,
            height: self.height,
        }
    }

    /// Same examples with a different input matrix (e.g. denoised images).
    pub fn with_noisy(&self, noisy: Matrix) -> Result<TripletDataset> {
        TripletDataset::new(
            self.clean.clone(),
            noisy,
            self.labels_onehot.clone(),
            self.width,
            self.height,
        )
    }
}

/// Row-gathering shared by both dataset kinds.
pub trait Rows: Sized {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn select(&self, indices: &[usize]) -> Result<Self>;
}

impl Rows for ImageDataset {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn select(&self, indices: &[usize]) -> Result<Self> {
        Ok(ImageDataset {
            images: self.images.select_rows(indices)?,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ..*self
        })
    }
}

impl Rows for TripletDataset {
    fn len(&self) -> usize {
        self.clean.rows()
    }

    fn select(&self, indices: &[usize]) -> Result<Self> {
        Ok(TripletDataset {
            clean: self.clean.select_rows(indices)?,
            noisy: self.noisy.select_rows(indices)?,
            labels_onehot: self.labels_onehot.select_rows(indices)?,
            width: self.width,
            height: self.height,
        })
    }
}

/// N x K indicator matrix.
pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(labels.len(), num_classes);
    for (r, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(Error::contract(format!(
                "label {l} at row {r} is not below {num_classes}"
            )));
        }
        m.set(r, l, 1.0);
    }
    Ok(m)
}

/// Pairs each clean example with the noisy image at the same row.
pub fn make_triplets(clean: &ImageDataset, noisy_images: &Matrix) -> Result<TripletDataset> {
    if noisy_images.rows() != clean.len() {
        return Err(Error::contract(format!(
            "{} clean examples but {} noisy images",
            clean.len(),
            noisy_images.rows()
        )));
    }
    TripletDataset::new(
        clean.images.clone(),
        noisy_images.clone(),
        one_hot(&clean.labels, clean.num_classes)?,
        clean.width,
        clean.height,
    )
}

/// Shuffled partition into (train, test) with `round(fraction * N)` training
/// rows. Deterministic in `seed`.
pub fn split<D: Rows>(dataset: &D, train_fraction: f64, seed: u64) -> Result<(D, D)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::contract(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let n_train = libm::round(train_fraction * n as f64) as usize;
    let (train, test) = order.split_at(n_train);
    Ok((dataset.select(train)?, dataset.select(test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn tiny(n: usize) -> ImageDataset {
        let images = Matrix::from_fn(n, 4, |r, c| ((r * 4 + c) % 7) as f64 / 7.0);
        let labels = (0..n).map(|i| i % 3).collect();
        ImageDataset::new(images, labels, 2, 2, 3).unwrap()
    }

    #[test]
    fn one_hot_rows() {
        let m = one_hot(&[3], 10).unwrap();
        assert_eq!(m.row(0), &[0., 0., 0., 1., 0., 0., 0., 0., 0., 0.]);
        assert_eq!(one_hot(&[0, 1], 2).unwrap(), Matrix::identity(2));
        let err = one_hot(&[0, 5], 3).unwrap_err();
        assert!(alloc::format!("{err}").contains("row 1"));
    }

    #[test]
    fn dataset_rejects_bad_values() {
        let img = Matrix::filled(1, 4, 1.5);
        assert!(ImageDataset::new(img, vec![0], 2, 2, 3).is_err());
        let img = Matrix::zeros(1, 4);
        assert!(ImageDataset::new(img.clone(), vec![3], 2, 2, 3).is_err());
        assert!(ImageDataset::new(img, vec![0, 1], 2, 2, 3).is_err());
    }

    #[test]
    fn single_example_triplet() {
        let ds = tiny(1);
        let t = make_triplets(&ds, ds.images()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.labels(), vec![0]);
    }

    #[test]
    fn triplets_need_matching_counts() {
        let ds = tiny(3);
        assert!(make_triplets(&ds, &Matrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn triplets_keep_rows_aligned() {
        let mut ds = tiny(5);
        // Sentinel pixel equal to the row index in both images and labels.
        let mut noisy = Matrix::zeros(5, 4);
        for r in 0..5 {
            ds.images.set(r, 0, r as f64 / 10.0);
            noisy.set(r, 3, r as f64 / 10.0);
        }
        let t = make_triplets(&ds, &noisy).unwrap();
        for r in 0..5 {
            assert_eq!(t.clean().get(r, 0), r as f64 / 10.0);
            assert_eq!(t.noisy().get(r, 3), r as f64 / 10.0);
            assert_eq!(t.labels()[r], r % 3);
        }
    }

    #[test]
    fn split_eighty_twenty() {
        let (train, test) = split(&tiny(10), 0.8, 1).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        assert!(split(&tiny(10), 1.0, 1).is_err());
        assert!(split(&tiny(10), 0.0, 1).is_err());
    }

    #[test]
    fn split_is_deterministic() {
        let ds = tiny(20);
        assert_eq!(split(&ds, 0.7, 5).unwrap(), split(&ds, 0.7, 5).unwrap());
    }

    #[test]
    fn replicate_keeps_example_major_order() {
        let r = tiny(2).replicate(3);
        assert_eq!(r.labels(), &[0, 0, 0, 1, 1, 1]);
        assert_eq!(r.images().row(2), tiny(2).images().row(0));
    }

    #[test]
    fn binarize_threshold() {
        let img = Matrix::from_rows(&[[0.2, 0.5, 0.7, 0.49]]).unwrap();
        let ds = ImageDataset::new(img, vec![0], 2, 2, 1).unwrap().binarized();
        assert_eq!(ds.images().as_slice(), &[0.0, 1.0, 1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn one_hot_inverts_through_argmax(labels in proptest::collection::vec(0usize..7, 0..40)) {
            prop_assert_eq!(one_hot(&labels, 7).unwrap().argmax_rows(), labels);
        }

        #[test]
        fn split_is_a_partition(n in 2usize..40, frac in 0.05f64..0.95, seed: u64) {
            let ds = tiny(n);
            let (a, b) = split(&ds, frac, seed).unwrap();
            prop_assert_eq!(a.len() + b.len(), n);
            let mut rows: Vec<Vec<u64>> = a.images().as_slice().chunks(4)
                .chain(b.images().as_slice().chunks(4))
                .map(|r| r.iter().map(|v| v.to_bits()).collect())
                .collect();
            let mut orig: Vec<Vec<u64>> = ds.images().as_slice().chunks(4)
                .map(|r| r.iter().map(|v| v.to_bits()).collect())
                .collect();
            rows.sort();
            orig.sort();
            prop_assert_eq!(rows, orig);
        }
    }
}
