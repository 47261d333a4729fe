use hipt_core::approximator::{Network, NetworkSpec};
use hipt_core::env::{bundled_layout, observation_len};
use hipt_core::eval::*;
use hipt_core::policy::{NoisyPolicy, StayPolicy, UniformPolicy};
use hipt_core::population::{PartnerPopulation, PopulationMember};
use hipt_core::scripted::ScriptedCook;

fn fixture_population(size: usize, first_seed: u64) -> PartnerPopulation {
    let layout = bundled_layout("cramped_room").unwrap();
    let spec = NetworkSpec::flat(observation_len(&layout), vec![8]);
    let net = Network::new(spec.clone()).unwrap();
    let members = (0..size as u64)
        .map(|i| {
            let s = first_seed + i;
            PopulationMember {
                seed: s,
                full: net.init_params(s + 100),
                mid: net.init_params(s + 200),
                random: net.init_params(s),
                j_sp_full: 0.0,
                j_sp_mid: 0.0,
                mid_update: 1,
                full_update: 2,
                mid_in_band: true,
            }
        })
        .collect();
    PartnerPopulation { layout: layout.name.clone(), spec, members }
}

#[test]
fn suite_rejects_shared_seeds() {
    let pop = fixture_population(3, 10);
    assert!(matches!(EvalSuite::new(pop.clone(), &[0, 1, 11], 400), Err(EvalError::SeedOverlap(s)) if s == vec![11]));
    assert!(EvalSuite::new(pop, &[0, 1, 2], 400).is_ok());
}

#[test]
fn population_report_shape_and_aggregates() {
    let layout = bundled_layout("cramped_room").unwrap();
    let pop = fixture_population(2, 50);
    let mut suite = EvalSuite::new(pop.clone(), &[0], 120).unwrap();
    suite.episodes = 2;
    let digests: Vec<String> = pop.members.iter().map(|m| m.full.digest()).collect();
    let out = evaluate_vs_population(&mut ScriptedCook, "scripted", &layout, &suite).unwrap();

    let types: Vec<&str> = out.rows.iter().map(|r| r.partner_type.as_str()).collect();
    assert_eq!(types, ["full", "mid", "random", "all"]);
    for r in &out.rows[..3] {
        assert_eq!(r.n, 2 * 2 * 2);
    }
    assert_eq!(out.row("all").unwrap().n, 3 * 2 * 2 * 2);
    assert_eq!(out.cells.len(), 6);
    for c in &out.cells {
        assert_eq!(c.returns.len(), 4);
        assert_eq!(c.agent_seats, vec![0, 0, 1, 1]);
    }
    // Aggregate equals the mean of equally sized cells.
    let cell_means: Vec<f64> =
        out.cells.iter().map(|c| c.returns.iter().sum::<f64>() / c.returns.len() as f64).collect();
    let recomputed = cell_means.iter().sum::<f64>() / cell_means.len() as f64;
    assert!((out.row("all").unwrap().mean - recomputed).abs() < 1e-9);

    let again = evaluate_vs_population(&mut ScriptedCook, "scripted", &layout, &suite).unwrap();
    assert_eq!(out, again);
    let after: Vec<String> = suite.population.members.iter().map(|m| m.full.digest()).collect();
    assert_eq!(digests, after);

    suite.episodes = 0;
    assert!(matches!(evaluate_vs_population(&mut ScriptedCook, "x", &layout, &suite), Err(EvalError::NoEpisodes)));
}

#[test]
fn stay_partner_on_separated_layout_scores_zero() {
    let layout = bundled_layout("forced_coordination").unwrap();
    let stats = evaluate_pair(&mut ScriptedCook, &mut StayPolicy, &layout, 200, 2, 0).unwrap();
    assert_eq!(stats.mean(), 0.0);
    assert_eq!(stats.n(), 4);
}

fn table_rows() -> Vec<ReportRow> {
    let layouts =
        ["cramped_room", "asymmetric_advantages", "coordination_ring", "forced_coordination", "counter_circuit"];
    let mut rows = Vec::new();
    for (i, l) in layouts.iter().enumerate() {
        for (j, m) in ["SP", "PBT", "HiPT"].iter().enumerate() {
            rows.push(ReportRow {
                layout: l.to_string(),
                method: m.to_string(),
                partner_type: "all".into(),
                mean: 10.0 * i as f64 + j as f64 / 3.0,
                std: 0.1 + j as f64,
                n: 30,
            });
        }
    }
    rows
}

#[test]
fn report_rendering() {
    let rows = table_rows();
    let csv = emit_report(&rows, ReportFormat::Csv).unwrap();
    assert_eq!(csv.lines().next().unwrap(), REPORT_COLUMNS.join(","));
    assert_eq!(csv.lines().count(), 16);
    assert_eq!(csv, emit_report(&rows, ReportFormat::Csv).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    write_report(&rows, &path, ReportFormat::Csv).unwrap();
    assert_eq!(read_report_csv(&path).unwrap(), rows);

    let text = emit_report(&rows, ReportFormat::Text).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 16);
    assert!(lines[0].starts_with("layout"));
    // Right-aligned numeric columns end at the same offset.
    assert!(lines.iter().skip(1).all(|l| l.len() == lines[1].len()));

    assert!(matches!(emit_report(&[], ReportFormat::Csv), Err(EvalError::EmptyReport)));
}

#[test]
fn split_is_disjoint_and_deterministic() {
    let layout = bundled_layout("cramped_room").unwrap();
    let records = record_episodes(&mut ScriptedCook, &mut UniformPolicy, &layout, 30, 10, 0).unwrap();
    let (a, b) = split_by_episode(&records, 0.3, 4);
    assert_eq!(a.len() + b.len(), records.len());
    assert_eq!(b.len(), 3 * 30);
    assert!(a.iter().all(|r| b.iter().all(|s| s.episode != r.episode)));
    assert_eq!(split_by_episode(&records, 0.3, 4), (a, b));
}

#[test]
fn overlapping_splits_are_rejected() {
    let layout = bundled_layout("cramped_room").unwrap();
    let records = record_episodes(&mut ScriptedCook, &mut UniformPolicy, &layout, 20, 3, 0).unwrap();
    let heldout: Vec<_> = records[20..40].to_vec();
    let err = train_bc(&records, &heldout, &layout, &BcConfig::default()).unwrap_err();
    assert!(matches!(err, EvalError::EpisodeOverlap(ids) if ids.len() == 1));
    assert!(matches!(train_bc(&[], &[], &layout, &BcConfig::default()), Err(EvalError::EmptyDataset)));
}

#[test]
fn dataset_replay_checks_digests() {
    let layout = bundled_layout("cramped_room").unwrap();
    let mut records = record_episodes(&mut UniformPolicy, &mut UniformPolicy, &layout, 25, 2, 3).unwrap();
    let data = BcDataset::from_records(&records, &layout, &[0, 1], 25).unwrap();
    assert_eq!(data.len(), 100);
    assert_eq!(data.episodes.len(), 2);
    assert_eq!(data.digest, records_digest(&records));
    records[5].state_digest = "00".into();
    assert!(matches!(BcDataset::from_records(&records, &layout, &[0], 25), Err(EvalError::Replay(_))));
}

#[test]
fn single_action_dataset_warns() {
    let layout = bundled_layout("cramped_room").unwrap();
    let train = record_episodes(&mut StayPolicy, &mut StayPolicy, &layout, 20, 2, 0).unwrap();
    let heldout = record_episodes(&mut StayPolicy, &mut StayPolicy, &layout, 20, 1, 50).unwrap();
    let config = BcConfig { epochs: 2, trunk: vec![8], ..BcConfig::default() };
    let model = train_bc(&train, &heldout, &layout, &config).unwrap();
    assert_eq!(model.warnings.len(), 1);
    assert_eq!(model.heldout_accuracy, 1.0);
}

#[test]
fn random_actions_clone_at_chance() {
    let layout = bundled_layout("cramped_room").unwrap();
    let train = record_episodes(&mut UniformPolicy, &mut UniformPolicy, &layout, 200, 8, 0).unwrap();
    let heldout = record_episodes(&mut UniformPolicy, &mut UniformPolicy, &layout, 200, 4, 100).unwrap();
    let config = BcConfig { epochs: 3, trunk: vec![16], ..BcConfig::default() };
    let model = train_bc(&train, &heldout, &layout, &config).unwrap();
    assert!((model.heldout_accuracy - 1.0 / 6.0).abs() < 0.05, "{}", model.heldout_accuracy);
}

#[test]
fn scripted_cook_is_cloned_accurately() {
    let layout = bundled_layout("cramped_room").unwrap();
    let mut partner = NoisyPolicy { inner: ScriptedCook, epsilon: 0.2 };
    let records = record_episodes(&mut ScriptedCook, &mut partner, &layout, 400, 24, 0).unwrap();
    let (train, heldout) = split_by_episode(&records, 0.25, 1);
    let config = BcConfig { seats: vec![0], ..BcConfig::default() };
    let model = train_bc(&train, &heldout, &layout, &config).unwrap();
    assert!(model.heldout_accuracy >= 0.99, "held-out accuracy {}", model.heldout_accuracy);
    assert!(model.warnings.is_empty());

    // Moving average of the loss never rises more than 5%.
    let smooth: Vec<f64> = model.train_loss.windows(3).map(|w| w.iter().sum::<f64>() / 3.0).collect();
    for w in smooth.windows(2) {
        assert!(w[1] <= w[0] * 1.05, "{:?}", model.train_loss);
    }

    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path(), "bc").unwrap();
    let back = BcModel::load(dir.path(), "bc").unwrap();
    assert_eq!(back, model);
}

#[test]
fn run_dir_manifest_detects_tampering() {
    use hipt_core::artifacts::*;
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("pop")).unwrap();
    std::fs::write(dir.path().join("config.toml"), "seed = 1\n").unwrap();
    std::fs::write(dir.path().join("pop/a.model"), [1u8, 2, 3]).unwrap();
    let m = write_manifest(dir.path(), "train-population").unwrap();
    assert_eq!(m.files.keys().collect::<Vec<_>>(), ["config.toml", "pop/a.model"]);
    assert_eq!(verify_run_dir(dir.path()).unwrap(), m);
    verify_file(dir.path(), "pop/a.model").unwrap();

    std::fs::write(dir.path().join("pop/a.model"), [1u8, 2, 4]).unwrap();
    assert!(
        matches!(verify_run_dir(dir.path()), Err(ArtifactError::ChecksumMismatch { file }) if file == "pop/a.model")
    );
    std::fs::remove_file(dir.path().join("config.toml")).unwrap();
    assert!(matches!(
        verify_file(dir.path(), "config.toml"),
        Err(ArtifactError::ChecksumMismatch { .. }) | Err(ArtifactError::Io { .. })
    ));
}
