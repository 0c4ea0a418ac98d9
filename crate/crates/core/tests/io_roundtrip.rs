//! Loading, writing and reading back every artifact the pipeline produces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use zimcal::crossval::CvPosterior;
use zimcal::io::tables::{
    read_cv_samples, read_summary, site_names, species_names, summary_rows, write_climate, write_counts,
    write_cv_samples, write_summary,
};
use zimcal::io::{load_chain, load_dataset, save_chain, ChainFile, LoadOptions};
use zimcal::model::{ClimateTable, CountMatrix, PriorConfig, Univariate};
use zimcal::samplers::{rng_stream, ChainState, Model, RunSpec, Sampler};
use zimcal::Error;

#[test]
fn sparse_62_by_52_table_loads_with_its_zero_fraction() {
    let (n, m) = (62, 52);
    let mut rng = ChaCha8Rng::seed_from_u64(59);
    let mut rows = Vec::with_capacity(n);
    while rows.len() < n {
        let row: Vec<u32> =
            (0..m).map(|_| if rng.random::<f64>() < 0.59 { 0 } else { rng.random_range(1..40) }).collect();
        if row.iter().any(|&c| c > 0) {
            rows.push(row);
        }
    }
    let counts = CountMatrix::from_rows(&rows).unwrap();
    let climate = ClimateTable::from_column((0..n).map(|i| 5.0 + 0.2 * i as f64).collect()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (cp, xp) = (dir.path().join("counts.csv"), dir.path().join("climate.csv"));
    write_counts(&cp, &counts, &site_names(n), &species_names(m)).unwrap();
    write_climate(&xp, &climate, &site_names(n)).unwrap();

    let loaded = load_dataset(&cp, &xp, &LoadOptions::default()).unwrap();
    assert_eq!(loaded.dataset.counts, counts);
    assert_eq!(loaded.dataset.climate, climate);
    assert_eq!(loaded.species.len(), 52);
    let zf = loaded.dataset.counts.zero_fraction();
    assert!((zf - 0.59).abs() < 0.03, "zero fraction {zf}");
}

#[test]
fn standardized_climate_survives_a_write_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let (cp, xp) = (dir.path().join("counts.csv"), dir.path().join("climate.csv"));
    std::fs::write(&cp, "site,a,b\ns1,1,0\ns2,3,2\ns3,0,5\n").unwrap();
    std::fs::write(&xp, "site,gdd5,mtco\ns1,1200.5,-3.25\ns2,1800,-11\ns3,950.25,2.5\n").unwrap();
    let opts = LoadOptions { standardize: true, ..Default::default() };
    let first = load_dataset(&cp, &xp, &opts).unwrap();
    assert_eq!(first.dataset.counts.row_totals(), &[1, 5, 5]);

    let xp2 = dir.path().join("again.csv");
    write_climate(&xp2, &first.dataset.climate, &first.sites).unwrap();
    let second = load_dataset(&cp, &xp2, &opts).unwrap();
    for (a, b) in first.dataset.climate.values().iter().zip(second.dataset.climate.values()) {
        assert!((a - b).abs() < 1e-12);
    }
    let raw = second.dataset.climate.standardization().unwrap().to_raw(second.dataset.climate.point(1));
    assert!((raw[0] - 1800.0).abs() < 1e-9 && (raw[1] + 11.0).abs() < 1e-9, "{raw:?}");
}

#[test]
fn bad_tables_are_rejected_with_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let xp = dir.path().join("climate.csv");
    std::fs::write(&xp, "site,x\ns1,10\ns2,12\n").unwrap();
    let cases = [
        ("site,a,b\ns1,1,0\ns2,0,0\n", "line 3"),
        ("site,a,b\ns1,1,-2\ns2,1,1\n", "'b'"),
        ("site,a,b\ns1,1,x\ns2,1,1\n", "line 2"),
    ];
    for (text, needle) in cases {
        let cp = dir.path().join("counts.csv");
        std::fs::write(&cp, text).unwrap();
        let err = load_dataset(&cp, &xp, &LoadOptions::default()).unwrap_err().to_string();
        assert!(err.contains(needle), "{err}");
    }
    let cp = dir.path().join("counts.csv");
    std::fs::write(&cp, "site,a\ns1,1\ns2,1\ns3,2\n").unwrap();
    assert!(load_dataset(&cp, &xp, &LoadOptions::default()).is_err());
    let missing = dir.path().join("nope.csv");
    assert!(matches!(load_dataset(&missing, &xp, &LoadOptions::default()), Err(Error::MissingArtifact(_))));
}

#[test]
fn stored_chain_resumes_exactly() {
    let counts = CountMatrix::from_rows(&[vec![4, 0, 1], vec![0, 2, 7], vec![2, 3, 0]]).unwrap();
    let climate = ClimateTable::from_column(vec![9.0, 12.0, 14.5]).unwrap();
    let mut prior = PriorConfig::chironomid();
    prior.atoms = 3;
    let model = Model::new(&counts, &climate, &prior);
    let mut s = Sampler::<Univariate>::from_prior(model, None, rng_stream(4, 0)).unwrap();
    let store = s.run(RunSpec { iterations: 40, burn_in: 10, thin: 3 }).unwrap();
    let tuning = s.tuning.clone();
    let file = ChainFile {
        n_sites: 3,
        n_species: 3,
        draws: store.draws,
        acceptance: store.acceptance,
        final_state: Some(s.state().clone()),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.bin");
    save_chain(&path, &file).unwrap();
    let back = load_chain::<Univariate>(&path).unwrap();
    assert_eq!(back, file);

    let state: ChainState<Univariate> = back.final_state.unwrap();
    let mut resumed = Sampler::new(model, state, tuning).unwrap();
    for _ in 0..5 {
        s.sweep().unwrap();
        resumed.sweep().unwrap();
    }
    assert_eq!(s.state(), resumed.state());
}

#[test]
fn cv_samples_and_summaries_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cv: Vec<CvPosterior> = (0..3)
        .map(|i| {
            let s: Vec<f64> = (0..400)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    10.0 + i as f64 + 0.7 * e
                })
                .collect();
            CvPosterior::new(i, 1, s, 0.95, None).unwrap()
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    for p in &cv {
        let path = dir.path().join(format!("s{}.csv", p.site));
        write_cv_samples(&path, p).unwrap();
        let (dim, samples) = read_cv_samples(&path).unwrap();
        assert_eq!(dim, 1);
        assert_eq!(samples, p.samples);
    }
    let observed = ClimateTable::from_column(vec![10.2, 25.0, 12.1]).unwrap();
    let rows = summary_rows(&cv, &observed);
    assert!(rows[0].covered && !rows[1].covered);
    let path = dir.path().join("summary.csv");
    write_summary(&path, &rows).unwrap();
    assert_eq!(read_summary(&path).unwrap(), rows);
}
