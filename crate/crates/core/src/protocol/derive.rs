//! Per-variant secret derivations and the bit/position arithmetic built on them.

use std::sync::LazyLock;

use crate::crypto::{f2_seed, DhKey, Digest256, HmacKey, Nonce128};

use super::{Passkey, ProtocolError};

/// Rounds in the Original and SM variants.
pub const PASSKEY_ROUNDS: u8 = 20;
/// Rounds in the Enhanced variant.
pub const ENHANCED_ROUNDS: u8 = 10;

/// Bit disclosed in round `i` (1-based, LSB first).
pub fn passkey_bit(value: u32, i: u8) -> Result<bool, ProtocolError> {
    if !(1..=PASSKEY_ROUNDS).contains(&i) {
        return Err(ProtocolError::RoundOutOfRange {
            round: i,
            max: PASSKEY_ROUNDS,
        });
    }
    Ok((value >> (i - 1)) & 1 == 1)
}

/// SM authentication value: the six leading decimal digits of
/// `f2(DHKey, N_a0 ‖ N_b0 ‖ r)` read as a big-endian integer.
pub fn sm_derive_rstar(dhkey: &DhKey, n_a0: &Nonce128, n_b0: &Nonce128, r: Passkey) -> u32 {
    let digest = f2_seed(dhkey, &[&n_a0.0, &n_b0.0, &r.to_be_bytes()]);
    leading_six_digits(&digest)
}

/// Precomputed SM seed state for one session, for evaluating many candidate passkeys.
#[derive(Clone)]
pub struct SmSeed {
    key: HmacKey,
    prefix: [u8; 32],
}

impl SmSeed {
    pub fn new(dhkey: &DhKey, n_a0: &Nonce128, n_b0: &Nonce128) -> Self {
        let mut prefix = [0u8; 32];
        prefix[..16].copy_from_slice(&n_a0.0);
        prefix[16..].copy_from_slice(&n_b0.0);
        SmSeed {
            key: HmacKey::new(dhkey.as_bytes()),
            prefix,
        }
    }

    pub fn rstar(&self, candidate: u32) -> u32 {
        leading_six_digits(&self.key.digest(&[&self.prefix, &candidate.to_be_bytes()]))
    }
}

/// Enhanced per-session hash `r' = f2(DHKey, r)`.
pub fn enhanced_derive_rprime(dhkey: &DhKey, r: Passkey) -> Digest256 {
    f2_seed(dhkey, &[&r.to_be_bytes()])
}

/// Byte `i` of `r'`, counting from the most significant byte (i = 1).
pub fn rprime_block(rp: &Digest256, i: u8) -> Result<u8, ProtocolError> {
    if !(1..=ENHANCED_ROUNDS).contains(&i) {
        return Err(ProtocolError::RoundOutOfRange {
            round: i,
            max: ENHANCED_ROUNDS,
        });
    }
    Ok(rp.0[usize::from(i) - 1])
}

/// Bit `pos` of `r'`, where position 1 is the most significant bit.
pub fn rprime_bit(rp: &Digest256, pos: u16) -> Result<bool, ProtocolError> {
    if !(1..=255).contains(&pos) {
        return Err(ProtocolError::PositionOutOfRange(pos));
    }
    let idx = usize::from(pos - 1);
    Ok(rp.0[idx / 8] >> (7 - idx % 8) & 1 == 1)
}

/// XOR of a position with a key block; its own inverse.
pub fn mask_position(n_prime: u8, block: u8) -> u8 {
    n_prime ^ block
}

// Big-endian u64 limbs, most significant first.
type U256 = [u64; 4];

static POW10: LazyLock<Vec<U256>> = LazyLock::new(|| {
    let mut table = Vec::with_capacity(78);
    let mut v: U256 = [0, 0, 0, 1];
    table.push(v);
    for _ in 1..78 {
        v = mul_small(&v, 10).expect("10^77 < 2^256");
        table.push(v);
    }
    table
});

fn mul_small(a: &U256, m: u64) -> Option<U256> {
    let mut out = [0u64; 4];
    let mut carry = 0u128;
    for i in (0..4).rev() {
        let t = u128::from(a[i]) * u128::from(m) + carry;
        out[i] = t as u64;
        carry = t >> 64;
    }
    (carry == 0).then_some(out)
}

fn to_f64(a: &U256) -> f64 {
    a.iter().fold(0.0, |acc, &limb| {
        acc * 18_446_744_073_709_551_616.0 + limb as f64
    })
}

/// The six most significant decimal digits of a 256-bit big-endian integer.
///
/// Values below 10^5 have fewer than six digits and are returned whole.
pub fn leading_six_digits(digest: &Digest256) -> u32 {
    let mut d: U256 = [0; 4];
    for (limb, chunk) in d.iter_mut().zip(digest.0.chunks_exact(8)) {
        *limb = u64::from_be_bytes(chunk.try_into().expect("8-byte chunk"));
    }
    let pow10 = &*POW10;
    if d < pow10[6] {
        return d[3] as u32;
    }
    let digits = pow10.iter().rposition(|p| *p <= d).expect("d >= 1") + 1;
    let divisor = &pow10[digits - 6];
    // The float quotient is within one of the truth; settle it exactly.
    let mut q = ((to_f64(&d) / to_f64(divisor)) as u64).clamp(100_000, 999_999);
    while mul_small(divisor, q).is_none_or(|p| p > d) {
        q -= 1;
    }
    while mul_small(divisor, q + 1).is_some_and(|p| p <= d) {
        q += 1;
    }
    q as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{CurveId, Rng};

    fn dhkey(rng: &mut Rng) -> DhKey {
        let mut b = vec![0u8; 32];
        rng.fill(&mut b);
        DhKey::new(CurveId::P256, b).unwrap()
    }

    #[test]
    fn passkey_bits_lsb_first() {
        assert!(passkey_bit(1, 1).unwrap());
        assert!(!passkey_bit(1, 2).unwrap());
        // 999999 = 0xF423F
        let bits: String = (1..=20)
            .map(|i| {
                if passkey_bit(999_999, i).unwrap() {
                    '1'
                } else {
                    '0'
                }
            })
            .collect();
        assert_eq!(
            bits.chars().rev().collect::<String>(),
            "11110100001000111111"
        );
        assert!(passkey_bit(0, 0).is_err());
        assert!(passkey_bit(0, 21).is_err());
    }

    #[test]
    fn rstar_matches_on_both_sides_and_has_six_digits() {
        let mut rng = Rng::from_seed(1);
        for _ in 0..10_000 {
            let w = dhkey(&mut rng);
            let (na, nb) = (rng.nonce128(), rng.nonce128());
            let r = Passkey::new(rng.passkey()).unwrap();
            let rs = sm_derive_rstar(&w, &na, &nb, r);
            assert!((100_000..=999_999).contains(&rs), "{rs}");
            assert!(rs < 1 << 20);
            assert_eq!(rs, SmSeed::new(&w, &na, &nb).rstar(r.value()));
        }
    }

    #[test]
    fn rstar_depends_on_seed_nonce() {
        let mut rng = Rng::from_seed(2);
        let mut changed = 0;
        for _ in 0..1000 {
            let w = dhkey(&mut rng);
            let (na, nb) = (rng.nonce128(), rng.nonce128());
            let r = Passkey::new(rng.passkey()).unwrap();
            let mut na2 = na;
            na2.0[rng.below(16) as usize] ^= 1 << rng.below(8);
            if sm_derive_rstar(&w, &na, &nb, r) != sm_derive_rstar(&w, &na2, &nb, r) {
                changed += 1;
            }
        }
        // 900000 possible outputs; a handful of collisions at most.
        assert!(changed >= 995, "{changed}");
    }

    #[test]
    fn rprime_depends_on_dhkey_and_avalanches() {
        let mut rng = Rng::from_seed(3);
        let mut total = 0u32;
        for _ in 0..1000 {
            let w = dhkey(&mut rng);
            let r = rng.passkey() % 999_999;
            let a = enhanced_derive_rprime(&w, Passkey::new(r).unwrap());
            let b = enhanced_derive_rprime(&w, Passkey::new(r + 1).unwrap());
            let distance: u32 = a.0.iter().zip(b.0).map(|(x, y)| (x ^ y).count_ones()).sum();
            assert!((98..=158).contains(&distance), "{distance}");
            total += distance;
            assert_ne!(
                a,
                enhanced_derive_rprime(&dhkey(&mut rng), Passkey::new(r).unwrap())
            );
        }
        let mean = f64::from(total) / 1000.0;
        assert!((mean - 128.0).abs() < 2.0, "{mean}");
    }

    #[test]
    fn blocks_and_bits_index_from_the_top() {
        let mut rp = Digest256([0; 32]);
        rp.0[0] = 0x01;
        assert_eq!(rprime_block(&rp, 1).unwrap(), 0x01);
        assert!(rprime_bit(&rp, 8).unwrap());
        assert!(!rprime_bit(&rp, 1).unwrap());
        rp.0[0] = 0x80;
        assert!(rprime_bit(&rp, 1).unwrap());
        let zero = Digest256([0; 32]);
        assert!((1..=10).all(|i| rprime_block(&zero, i).unwrap() == 0));
        assert!((1..=255).all(|p| !rprime_bit(&zero, p).unwrap()));
        assert!(rprime_block(&zero, 0).is_err());
        assert!(rprime_block(&zero, 11).is_err());
        assert!(rprime_bit(&zero, 0).is_err());
        assert!(rprime_bit(&zero, 256).is_err());
    }

    #[test]
    fn blocks_reconstruct_top_bytes_and_bits_match_popcount() {
        let mut rng = Rng::from_seed(4);
        for _ in 0..200 {
            let mut rp = Digest256([0; 32]);
            rng.fill(&mut rp.0);
            let top: Vec<u8> = (1..=10).map(|i| rprime_block(&rp, i).unwrap()).collect();
            assert_eq!(top, rp.0[..10]);
            let ones = (1..=255).filter(|&p| rprime_bit(&rp, p).unwrap()).count() as u32;
            let popcount: u32 =
                rp.0.iter().map(|b| b.count_ones()).sum::<u32>() - u32::from(rp.0[31] & 1);
            assert_eq!(ones, popcount);
        }
    }

    #[test]
    fn masking_is_self_inverse() {
        for x in 0..=255u8 {
            assert_eq!(mask_position(x, 0), x);
            assert_eq!(mask_position(x, x), 0);
            for b in [0x5a, 0xff, 0x01] {
                assert_eq!(mask_position(mask_position(x, b), b), x);
            }
        }
    }

    #[test]
    fn leading_digits_small_and_edge_values() {
        let from_u64 = |v: u64| {
            let mut d = Digest256([0; 32]);
            d.0[24..].copy_from_slice(&v.to_be_bytes());
            d
        };
        assert_eq!(leading_six_digits(&from_u64(0)), 0);
        assert_eq!(leading_six_digits(&from_u64(999_999)), 999_999);
        assert_eq!(leading_six_digits(&from_u64(1_000_000)), 100_000);
        assert_eq!(leading_six_digits(&from_u64(1_234_567_890)), 123_456);
        assert_eq!(leading_six_digits(&from_u64(9_999_999_999)), 999_999);
        // 2^256 - 1 = 115792089237316195423570985008687907853269984665640564039457584007913129639935
        assert_eq!(leading_six_digits(&Digest256([0xff; 32])), 115_792);
    }
}
