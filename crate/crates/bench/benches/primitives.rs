use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use ssplab_core::adversary::{bruteforce_filter, CandidateSet, DisclosedBits};
use ssplab_core::crypto::{ecdh_keygen, ecdh_shared, f1, hmac_sha256, CurveId, DhKey, Rng};
use ssplab_core::protocol::{sm_derive_rstar, Passkey, Passthrough, Session, Variant};

fn hashing(c: &mut Criterion) {
    let mut rng = Rng::from_seed(1);
    let (u, v) = ([7u8; 32], [9u8; 32]);
    let nonce = rng.nonce128();
    c.bench_function("hmac_sha256/64B", |b| {
        b.iter(|| hmac_sha256(black_box(&[1u8; 16]), black_box(&[2u8; 64])))
    });
    c.bench_function("f1", |b| {
        b.iter(|| f1(black_box(&u), black_box(&v), black_box(&nonce), 0x81))
    });
}

fn key_agreement(c: &mut Criterion) {
    for curve in [CurveId::P192, CurveId::P256] {
        let mut rng = Rng::from_seed(2);
        let peer = ecdh_keygen(&mut rng, curve);
        c.bench_function(&format!("ecdh/{curve}"), |b| {
            b.iter_batched(
                || ecdh_keygen(&mut rng, curve),
                |kp| ecdh_shared(&kp, peer.public()).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
}

fn filtering(c: &mut Criterion) {
    let mut rng = Rng::from_seed(3);
    let mut raw = vec![0u8; 32];
    rng.fill(&mut raw);
    let dh = DhKey::new(CurveId::P256, raw).unwrap();
    let (na, nb) = (rng.nonce128(), rng.nonce128());
    let rstar = sm_derive_rstar(&dh, &na, &nb, Passkey::new(123_456).unwrap());
    let candidates = CandidateSet::full(10_000);
    c.bench_function("bruteforce_filter/10^4", |b| {
        b.iter(|| {
            bruteforce_filter(
                &dh,
                &na,
                &nb,
                DisclosedBits::of(rstar, 7),
                &candidates,
                10_000,
            )
        })
    });
}

fn sessions(c: &mut Criterion) {
    let pk = Passkey::new(123_456).unwrap();
    for variant in Variant::ALL {
        let mut rng = Rng::from_seed(4);
        c.bench_function(&format!("session/{variant}"), |b| {
            b.iter(|| {
                let mut s = Session::honest(variant, CurveId::P256, pk, pk, &mut rng);
                s.run(&mut rng, &mut Passthrough)
            })
        });
    }
}

criterion_group!(benches, hashing, key_agreement, filtering, sessions);
criterion_main!(benches);
