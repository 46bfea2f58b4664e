//! Angle quantizer and bit-packed wire format.
//!
//! Codebook (802.11ac compressed beamforming): with `b_φ = b_ψ + 2`,
//! code `k` of a φ element decodes to `(2k+1)·π / 2^{b_φ}` and code `k` of a
//! ψ element to `(2k+1)·π / 2^{b_ψ+2}`. Encoding picks the bin whose center
//! is nearest, so the round-trip error is at most half a step.
//!
//! Wire format: two header bytes `[b_ψ, 0]`, then all codes in canonical
//! element order, each written least-significant bit first into a
//! continuous bit stream (stream bit `p` is bit `p % 8` of byte `p / 8`).
//! The final byte is zero-padded.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{canonical_labels, Bfi, BfiElement, ElementKind};
use crate::error::{Error, Result};

pub const MIN_PSI_BITS: u8 = 1;
pub const MAX_PSI_BITS: u8 = 9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizedBfi {
    pub m_tx: usize,
    pub n_rx: usize,
    pub b_psi: u8,
    pub b_phi: u8,
    /// One code per element, canonical order.
    pub codes: Vec<u16>,
}

fn check_bits(b_psi: u8) -> Result<()> {
    if !(MIN_PSI_BITS..=MAX_PSI_BITS).contains(&b_psi) {
        return Err(Error::invalid(format!(
            "b_psi must be in {MIN_PSI_BITS}..={MAX_PSI_BITS}, got {b_psi}"
        )));
    }
    Ok(())
}

pub fn quantize(theta: &Bfi, b_psi: u8) -> Result<QuantizedBfi> {
    check_bits(b_psi)?;
    theta.validate()?;
    let b_phi = b_psi + 2;
    let codes = theta
        .elements
        .iter()
        .map(|e| match e.kind {
            ElementKind::Phi => encode(e.value, 2.0 * PI, b_phi),
            ElementKind::Psi => encode(e.value, PI / 2.0, b_psi),
        })
        .collect();
    Ok(QuantizedBfi {
        m_tx: theta.m_tx,
        n_rx: theta.n_rx,
        b_psi,
        b_phi,
        codes,
    })
}

/// Bin index of `value` when `[0, span)` is split into `2^bits` bins.
fn encode(value: f64, span: f64, bits: u8) -> u16 {
    let levels = 1u32 << bits;
    let k = (value / span * levels as f64).floor();
    k.clamp(0.0, (levels - 1) as f64) as u16
}

fn decode(code: u16, span: f64, bits: u8) -> f64 {
    (2.0 * code as f64 + 1.0) * span / (2u32 << bits) as f64
}

pub fn dequantize(q: &QuantizedBfi) -> Result<Bfi> {
    q.validate()?;
    let labels = canonical_labels(q.n_rx, q.m_tx);
    let elements = labels
        .iter()
        .zip(&q.codes)
        .map(|(l, &code)| BfiElement {
            kind: l.kind,
            row: l.row,
            col: l.col,
            value: match l.kind {
                ElementKind::Phi => decode(code, 2.0 * PI, q.b_phi),
                ElementKind::Psi => decode(code, PI / 2.0, q.b_psi),
            },
        })
        .collect();
    Ok(Bfi {
        m_tx: q.m_tx,
        n_rx: q.n_rx,
        elements,
        degenerate: false,
    })
}

impl QuantizedBfi {
    pub fn validate(&self) -> Result<()> {
        check_bits(self.b_psi)?;
        if self.b_phi != self.b_psi + 2 {
            return Err(Error::invalid("b_phi must equal b_psi + 2"));
        }
        let labels = canonical_labels(self.n_rx, self.m_tx);
        if labels.len() != self.codes.len() || self.m_tx < 2 {
            return Err(Error::invalid(format!(
                "{}x{} BFI needs {} codes, got {}",
                self.n_rx,
                self.m_tx,
                labels.len(),
                self.codes.len()
            )));
        }
        for (l, &code) in labels.iter().zip(&self.codes) {
            if u32::from(code) >= 1u32 << self.width(l.kind) {
                return Err(Error::invalid(format!("code {code} too wide for {l}")));
            }
        }
        Ok(())
    }

    fn width(&self, kind: ElementKind) -> u8 {
        match kind {
            ElementKind::Phi => self.b_phi,
            ElementKind::Psi => self.b_psi,
        }
    }

    /// Total payload bits (excluding the header).
    pub fn payload_bits(&self) -> usize {
        canonical_labels(self.n_rx, self.m_tx)
            .iter()
            .map(|l| self.width(l.kind) as usize)
            .sum()
    }

    /// Header plus LSB-first packed codes.
    pub fn pack(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut out = vec![self.b_psi, 0];
        out.resize(2 + self.payload_bits().div_ceil(8), 0);
        let mut pos = 0usize;
        for (l, &code) in canonical_labels(self.n_rx, self.m_tx).iter().zip(&self.codes) {
            for bit in 0..self.width(l.kind) {
                if code >> bit & 1 == 1 {
                    out[2 + pos / 8] |= 1 << (pos % 8);
                }
                pos += 1;
            }
        }
        Ok(out)
    }

    /// Parses a packed buffer. Dimensions are not on the wire and must be
    /// supplied by the caller.
    pub fn unpack(bytes: &[u8], m_tx: usize, n_rx: usize) -> Result<Self> {
        let (&b_psi, rest) = bytes
            .split_first()
            .ok_or_else(|| Error::invalid("packed BFI is empty"))?;
        check_bits(b_psi)?;
        let (&reserved, payload) = rest
            .split_first()
            .ok_or_else(|| Error::invalid("packed BFI header truncated"))?;
        if reserved != 0 {
            return Err(Error::invalid(format!("reserved header byte is {reserved}, expected 0")));
        }
        if m_tx < 2 || n_rx < 1 {
            return Err(Error::invalid("invalid BFI dimensions"));
        }
        let mut q = QuantizedBfi {
            m_tx,
            n_rx,
            b_psi,
            b_phi: b_psi + 2,
            codes: Vec::new(),
        };
        let labels = canonical_labels(n_rx, m_tx);
        let need = q.payload_bits().div_ceil(8);
        if payload.len() != need {
            return Err(Error::invalid(format!(
                "payload is {} bytes, expected {need}",
                payload.len()
            )));
        }
        let mut pos = 0usize;
        for l in &labels {
            let mut code = 0u16;
            for bit in 0..q.width(l.kind) {
                if payload[pos / 8] >> (pos % 8) & 1 == 1 {
                    code |= 1 << bit;
                }
                pos += 1;
            }
            q.codes.push(code);
        }
        Ok(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bfi::bfi_element_count;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_theta(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Bfi {
        let vals: Vec<f64> = canonical_labels(n, m)
            .iter()
            .map(|l| match l.kind {
                ElementKind::Phi => rng.random_range(0.0..2.0 * PI),
                ElementKind::Psi => rng.random_range(0.0..=PI / 2.0),
            })
            .collect();
        Bfi::from_values(n, m, &vals).unwrap()
    }

    #[test]
    fn zeros_map_to_lowest_bin() {
        let theta = Bfi::from_values(2, 4, &[0.0; 10]).unwrap();
        let q = quantize(&theta, 7).unwrap();
        assert_eq!(q.b_phi, 9);
        assert!(q.codes.iter().all(|&c| c == 0));
        let back = dequantize(&q).unwrap();
        for v in back.values() {
            assert!((v - PI / 512.0).abs() < 1e-15);
        }
    }

    #[test]
    fn phi_pi_bin() {
        let theta = Bfi::from_values(1, 2, &[PI, 0.3]).unwrap();
        let q = quantize(&theta, 7).unwrap();
        assert!(q.codes[0] == 255 || q.codes[0] == 256);
        let back = dequantize(&q).unwrap();
        assert!((back.values()[0] - PI).abs() <= PI / 512.0 + 1e-15);
    }

    #[test]
    fn bit_width_checked() {
        let theta = Bfi::from_values(1, 2, &[1.0, 0.3]).unwrap();
        assert!(quantize(&theta, 0).is_err());
        assert!(quantize(&theta, 10).is_err());
    }

    #[test]
    fn round_trip_error_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for b_psi in [5u8, 7, 9] {
            let phi_half = PI / f64::from(1u32 << (b_psi + 2));
            let psi_half = PI / f64::from(1u32 << (b_psi + 2));
            for _ in 0..1000 {
                let theta = random_theta(2, 4, &mut rng);
                let back = dequantize(&quantize(&theta, b_psi).unwrap()).unwrap();
                for (a, b) in theta.elements.iter().zip(&back.elements) {
                    let bound = match a.kind {
                        ElementKind::Phi => phi_half,
                        ElementKind::Psi => psi_half,
                    };
                    assert!((a.value - b.value).abs() <= bound + 1e-12);
                }
            }
        }
    }

    #[test]
    fn hand_packed_vector() {
        // 2x2, b_psi = 2, b_phi = 4: φ = π → code 8 (bits 0001), ψ = π/4 →
        // code 2 (bits 01). Stream: 0,0,0,1,0,1 → byte 0b0010_1000.
        let theta = Bfi::from_values(2, 2, &[PI, PI / 4.0]).unwrap();
        let q = quantize(&theta, 2).unwrap();
        assert_eq!(q.codes, vec![8, 2]);
        assert_eq!(q.pack().unwrap(), vec![0x02, 0x00, 0x28]);
        assert_eq!(QuantizedBfi::unpack(&[0x02, 0x00, 0x28], 2, 2).unwrap(), q);
    }

    #[test]
    fn unpack_rejects_bad_buffers() {
        assert!(QuantizedBfi::unpack(&[], 2, 2).is_err());
        assert!(QuantizedBfi::unpack(&[2], 2, 2).is_err());
        assert!(QuantizedBfi::unpack(&[2, 1, 0x28], 2, 2).is_err());
        assert!(QuantizedBfi::unpack(&[2, 0, 0x28, 0], 2, 2).is_err());
        assert!(QuantizedBfi::unpack(&[12, 0, 0x28], 2, 2).is_err());
    }

    proptest! {
        #[test]
        fn pack_unpack_identity(seed in any::<u64>(), b_psi in 1u8..=9, n in 1usize..=4, m in 2usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = quantize(&random_theta(n, m, &mut rng), b_psi).unwrap();
            prop_assert_eq!(q.codes.len(), bfi_element_count(n, m));
            let bytes = q.pack().unwrap();
            prop_assert_eq!(bytes.len(), 2 + q.payload_bits().div_ceil(8));
            prop_assert_eq!(QuantizedBfi::unpack(&bytes, m, n).unwrap(), q);
        }
    }
}
