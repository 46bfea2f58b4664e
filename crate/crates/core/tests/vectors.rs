use std::path::PathBuf;

use bfisense::bfi::{csi_to_bfi, dequantize, quantize};
use bfisense::{Bfi, ComplexMatrix, QuantizedBfi};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn json<T: serde::de::DeserializeOwned>(name: &str) -> T {
    serde_json::from_str(&std::fs::read_to_string(data(name)).unwrap()).unwrap()
}

#[test]
fn diag_csi_gives_zero_angles() {
    let h: ComplexMatrix = json("diag_2_1_csi.json");
    let b = csi_to_bfi(&h).unwrap();
    assert_eq!(b.len(), 2);
    for v in b.values() {
        assert!(v.abs() < 1e-12, "{v}");
    }
}

#[test]
fn hand_packed_vector_is_bit_exact() {
    let q: QuantizedBfi = json("hand_2x2_b5.json");
    let bytes = std::fs::read(data("hand_2x2_b5.bin")).unwrap();
    assert_eq!(q.pack().unwrap(), bytes);
    assert_eq!(QuantizedBfi::unpack(&bytes, 2, 2).unwrap(), q);
}

#[test]
fn los_vector_is_stable() {
    let bfi: Bfi = json("los_4x2_bfi.json");
    let q: QuantizedBfi = json("los_4x2_b7.json");
    let bytes = std::fs::read(data("los_4x2_b7.bin")).unwrap();
    assert_eq!(quantize(&bfi, 7).unwrap(), q);
    assert_eq!(q.pack().unwrap(), bytes);
    assert_eq!(QuantizedBfi::unpack(&bytes, 4, 2).unwrap(), q);

    // Dequantized values sit within one bin of the originals.
    let back = dequantize(&q).unwrap();
    for ((a, b), kind) in bfi.values().iter().zip(back.values()).zip(bfi.kinds()) {
        let bin = match kind {
            bfisense::ElementKind::Phi => 2.0 * std::f64::consts::PI / 512.0,
            bfisense::ElementKind::Psi => std::f64::consts::FRAC_PI_2 / 128.0,
        };
        assert!((a - b).abs() <= bin, "{a} vs {b}");
    }
}
