//! Reads the real MNIST files. The directory comes from `TRIPATH_MNIST_DIR`
//! (default /root/data/mnist); `scripts/fetch_mnist.sh` populates it.

use std::path::PathBuf;

use tripath::idx::{encode_images, encode_labels, load_dataset};

fn mnist_dir() -> PathBuf {
    let dir = PathBuf::from(std::env::var("TRIPATH_MNIST_DIR").unwrap_or_else(|_| "/root/data/mnist".into()));
    assert!(
        dir.join("t10k-images-idx3-ubyte").is_file(),
        "MNIST not found in {}; run scripts/fetch_mnist.sh",
        dir.display()
    );
    dir
}

#[test]
fn mnist_shapes_and_labels() {
    let dir = mnist_dir();
    let train = load_dataset(
        dir.join("train-images-idx3-ubyte"),
        dir.join("train-labels-idx1-ubyte"),
        10,
    )
    .unwrap();
    assert_eq!(train.len(), 60_000);
    assert_eq!((train.width(), train.height()), (28, 28));
    assert!(train.labels().iter().all(|&l| l <= 9));
    let mut seen = [false; 10];
    for &l in train.labels() {
        seen[l] = true;
    }
    assert!(seen.iter().all(|&s| s));
}

#[test]
fn mnist_test_set_round_trips_byte_for_byte() {
    let dir = mnist_dir();
    let images = dir.join("t10k-images-idx3-ubyte");
    let labels = dir.join("t10k-labels-idx1-ubyte");
    let test = load_dataset(&images, &labels, 10).unwrap();
    assert_eq!(test.len(), 10_000);
    assert_eq!(
        encode_images(test.images(), 28, 28).unwrap(),
        std::fs::read(&images).unwrap()
    );
    assert_eq!(encode_labels(test.labels()).unwrap(), std::fs::read(&labels).unwrap());
}
