// SPDX-License-Identifier: Apache-2.0

use std::net::TcpListener;
use std::time::Duration;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use vfl_learn::TrainConfig;
use vfl_protocol::{
    audit_transcript, ciphertexts_per_epoch, compare_with_oracle, gradient_traffic_bound, run_coordinator,
    run_provider_a, run_provider_b, run_session, tcp_endpoint, PartyRole, ProviderAData, ProviderBData, Recorder,
    SessionParams, TcpAddrs,
};

fn setup(n: usize, da: usize, db: usize, p_mask: f64, seed: u64) -> (ProviderAData, ProviderBData, Vec<bool>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let xa = DMatrix::from_fn(n, da, |_, _| rng.gen_range(-1.5..1.5));
    let xb = DMatrix::from_fn(n, db, |_, _| rng.gen_range(-1.5..1.5));
    let y = (0..n)
        .map(|i| if xa[(i, 0)] + 0.5 * xb[(i, db - 1)] + rng.gen_range(-0.8..0.8) > 0.0 { 1.0 } else { -1.0 })
        .collect();
    let mask = (0..n).map(|_| rng.gen_bool(p_mask)).collect();
    (ProviderAData { x: xa, y }, ProviderBData { x: xb }, mask)
}

fn params(n: usize, da: usize, db: usize, batch: usize, holdout: usize, epochs: usize, bits: u64) -> SessionParams {
    let train = TrainConfig { batch, holdout, max_epochs: epochs, seed: 3, ..TrainConfig::default() };
    SessionParams { key_bits: bits, allow_insecure_key: true, ..SessionParams::new(n, da, db, train) }
}

#[test]
fn secure_training_matches_plaintext_sag() {
    let (a, b, mask) = setup(200, 3, 3, 0.8, 1);
    let p = params(200, 3, 3, 25, 40, 4, 512);
    let out = run_session(&p, &mask, &a, &b, None).unwrap();
    let r = compare_with_oracle(&p, &mask, &a, &b, &out.coordinator).unwrap();
    assert_eq!(r.gradients, 4 * 7);
    assert_eq!(r.losses, 4);
    assert!(r.gradient_rel <= 1e-9, "{r:?}");
    assert!(r.loss_rel <= 1e-9, "{r:?}");
    assert!(r.theta_abs <= 1e-6, "{r:?}");
}

#[test]
fn runs_are_deterministic_in_plaintext() {
    let (a, b, mask) = setup(60, 2, 2, 0.7, 2);
    let p = params(60, 2, 2, 16, 10, 3, 256);
    let x = run_session(&p, &mask, &a, &b, None).unwrap().coordinator;
    let y = run_session(&p, &mask, &a, &b, None).unwrap().coordinator;
    assert_eq!(x.trace, y.trace);
    assert_eq!(x.theta, y.theta);
}

#[test]
fn traffic_respects_cost_formula() {
    for (n, da, db, s, h) in [(50, 1, 2, 8, 10), (41, 3, 1, 40, 1), (30, 2, 2, 1, 5)] {
        let (a, b, mask) = setup(n, da, db, 0.9, n as u64);
        let rec = Recorder::new();
        let epochs = 2;
        let p = params(n, da, db, s, h, epochs, 256);
        run_session(&p, &mask, &a, &b, Some(&rec)).unwrap();
        let (grad, loss) = ciphertexts_per_epoch(&rec.transcript(), epochs);
        assert!(grad <= gradient_traffic_bound(n - h, s, da + db) as f64, "{grad}");
        assert_eq!(loss, (h + 2) as f64);
    }
}

#[test]
fn transcript_reveals_no_private_inputs() {
    let (a, b, mask) = setup(80, 2, 3, 0.75, 4);
    let rec = Recorder::new();
    let p = params(80, 2, 3, 10, 16, 2, 256);
    run_session(&p, &mask, &a, &b, Some(&rec)).unwrap();
    let report = audit_transcript(&rec.transcript(), &a, &b, &mask);
    assert!(report.clean(), "{report:?}");
}

#[test]
fn recorder_detects_planted_plaintext() {
    // The audit must flag data that does travel in clear.
    let (a, b, mask) = setup(40, 1, 1, 0.75, 5);
    let rec = Recorder::new();
    let [mut c, mut pa, _pb] = vfl_protocol::in_process_mesh(1, Duration::from_secs(5), Some(&rec));
    let leak = vfl_protocol::Message::ModelBroadcast {
        purpose: vfl_protocol::Purpose::Gradient,
        batch: 0,
        theta: a.x.iter().copied().chain(a.y.iter().copied()).collect(),
    };
    c.send(PartyRole::ProviderA, &leak).unwrap();
    pa.recv(PartyRole::Coordinator).unwrap();
    let report = audit_transcript(&rec.transcript(), &a, &b, &mask);
    assert_eq!(report.feature_hits, 40);
    assert!(report.label_hits > 0);
}

#[test]
fn tcp_session_matches_in_process_session() {
    let (a, b, mask) = setup(40, 2, 1, 0.8, 6);
    let p = params(40, 2, 1, 10, 8, 2, 256);
    let local = run_session(&p, &mask, &a, &b, None).unwrap().coordinator;
    let lc = TcpListener::bind("127.0.0.1:0").unwrap();
    let la = TcpListener::bind("127.0.0.1:0").unwrap();
    let addrs = TcpAddrs { coordinator: lc.local_addr().unwrap(), provider_a: la.local_addr().unwrap() };
    let t = Duration::from_secs(30);
    let remote = std::thread::scope(|s| {
        let (pr, ar, br) = (&p, &a, &b);
        let ha = s.spawn(move || {
            let mut ep = tcp_endpoint(PartyRole::ProviderA, pr.session, Some(&la), addrs, t).unwrap();
            run_provider_a(pr, ar, &mut ep).unwrap()
        });
        let hb = s.spawn(move || {
            let mut ep = tcp_endpoint(PartyRole::ProviderB, pr.session, None, addrs, t).unwrap();
            run_provider_b(pr, br, &mut ep).unwrap()
        });
        let mut ep = tcp_endpoint(PartyRole::Coordinator, p.session, Some(&lc), addrs, t).unwrap();
        let out = run_coordinator(&p, &mask, &mut ep).unwrap();
        ha.join().unwrap();
        hb.join().unwrap();
        out
    });
    assert_eq!(remote.trace, local.trace);
}
