use bn2o::exact::{enumerate_posterior, quickscore, DEFAULT_ENUMERATION_CAP, DEFAULT_QUICKSCORE_CAP};
use bn2o::netgen::{generate, NetGenConfig};
use bn2o::sampler::gen_benchmark;
use bn2o::{Network, Network32, ObservationModel};

// With nothing masked the augmented network says the same as the plain one,
// so the two oracles must agree on sampled cases.
#[test]
fn fully_observed_cases_agree_across_oracles() {
    let net: Network = generate(&NetGenConfig::tiny().with_seed(21)).unwrap();
    let obs = ObservationModel::new(0.0, 0.0).unwrap();
    let set = gen_benchmark(&net, &obs, 40, 2, 22, "").unwrap();
    let mut compared = 0;
    for case in &set.cases {
        let o = &case.observations;
        assert_eq!(o.pos().len() + o.neg().len(), net.num_findings());
        if o.pos().len() > DEFAULT_QUICKSCORE_CAP {
            continue;
        }
        let en = enumerate_posterior(&net, &obs, o, DEFAULT_ENUMERATION_CAP).unwrap();
        let qs = quickscore(&net, o.pos(), o.neg(), DEFAULT_QUICKSCORE_CAP).unwrap();
        assert!((en.log_evidence - qs.log_evidence).abs() < 1e-10, "case {}", case.id);
        for (a, b) in en.marginals.iter().zip(&qs.marginals) {
            assert!((a - b).abs() < 1e-10, "case {}", case.id);
        }
        compared += 1;
    }
    assert!(compared >= 30, "only {compared} cases under the cap");
}

#[test]
fn single_precision_network_tracks_double() {
    let cfg = NetGenConfig::tiny().with_seed(4);
    let a: Network = generate(&cfg).unwrap();
    let b: Network32 = generate(&cfg).unwrap();
    let obs = ObservationModel::new(0.5, 0.5).unwrap();
    let set = gen_benchmark(&a, &obs, 10, 2, 5, "").unwrap();
    for case in &set.cases {
        let o = &case.observations;
        let x = enumerate_posterior(&a, &obs, o, DEFAULT_ENUMERATION_CAP).unwrap();
        let obs32 = ObservationModel::new(0.5f32, 0.5f32).unwrap();
        let y = enumerate_posterior(&b, &obs32, o, DEFAULT_ENUMERATION_CAP).unwrap();
        for (p, q) in x.marginals.iter().zip(&y.marginals) {
            assert!((p - f64::from(*q)).abs() < 1e-3);
        }
    }
}
