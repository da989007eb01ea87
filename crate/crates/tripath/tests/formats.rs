use proptest::prelude::*;
use tripath::idx::{decode_images, decode_labels, encode_images, encode_labels};
use tripath::pgm::montage;
use tripath_core::Matrix;

fn image_bytes() -> impl Strategy<Value = (usize, usize, usize, Vec<u8>)> {
    (1usize..6, 1usize..7, 1usize..7)
        .prop_flat_map(|(n, h, w)| (Just(n), Just(h), Just(w), prop::collection::vec(any::<u8>(), n * h * w)))
}

proptest! {
    #[test]
    fn idx_images_survive_a_round_trip((n, h, w, pixels) in image_bytes()) {
        let m = Matrix::new(n, h * w, pixels.iter().map(|&b| f64::from(b) / 255.0).collect()).unwrap();
        let bytes = encode_images(&m, w, h).unwrap();
        prop_assert_eq!(bytes.len(), 16 + n * h * w);
        prop_assert_eq!(&bytes[16..], &pixels[..]);
        let back = decode_images(&bytes).unwrap();
        prop_assert_eq!((back.width, back.height), (w, h));
        prop_assert_eq!(back.images, m);
    }

    #[test]
    fn idx_labels_survive_a_round_trip(labels in prop::collection::vec(0usize..256, 0..40)) {
        let bytes = encode_labels(&labels).unwrap();
        prop_assert_eq!(decode_labels(&bytes).unwrap(), labels);
    }

    #[test]
    fn truncated_idx_is_rejected((n, h, w, pixels) in image_bytes(), cut in 1usize..4) {
        let m = Matrix::new(n, h * w, pixels.iter().map(|&b| f64::from(b) / 255.0).collect()).unwrap();
        let bytes = encode_images(&m, w, h).unwrap();
        let cut = cut.min(bytes.len());
        prop_assert!(decode_images(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn montage_size_follows_the_grid(n in 1usize..30, h in 1usize..6, w in 1usize..6, cols in 1usize..8) {
        let m = Matrix::from_fn(n, h * w, |r, c| ((r + c) % 2) as f64);
        let bytes = montage(&m, w, h, cols).unwrap();
        let gc = cols.min(n);
        let gr = n.div_ceil(gc);
        let (ow, oh) = (gc * w + gc - 1, gr * h + gr - 1);
        let header = format!("P5\n{ow} {oh}\n255\n");
        prop_assert!(bytes.starts_with(header.as_bytes()));
        prop_assert_eq!(bytes.len(), header.len() + ow * oh);
    }
}

#[test]
fn out_of_range_pixels_are_rejected() {
    let m = Matrix::new(1, 2, vec![0.5, 1.5]).unwrap();
    assert!(encode_images(&m, 2, 1).is_err());
    assert!(encode_labels(&[256]).is_err());
}
