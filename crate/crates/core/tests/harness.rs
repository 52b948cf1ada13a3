use std::io::Write;

use rigidleak_core::harness::{
    aggregate, emit_report, ingest_csv, read_json_report, render, run_experiment,
    run_experiment_with, ExperimentConfig, Reason, ReportFormat, RunOptions, Status, CSV_COLUMNS,
};
use rigidleak_core::Error;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).unwrap()
}

const KNOWN_INPUT: &str = r#"
seed = 5
repetitions = 10
epsilon = 0.3
[data]
kind = "random_gaussian"
dim = 6
records = 120
[attack]
kind = "known_input"
known_inputs = [2, 4, 6]
"#;

const KNOWN_SAMPLE: &str = r#"
seed = 6
repetitions = 3
epsilon = 0.05
[data]
kind = "gaussian"
mean = [10.0, 10.0, 10.0]
covariance = [[1.0, 1.5, 0.5], [1.5, 3.0, 2.5], [0.5, 2.5, 75.0]]
records = 600
[attack]
kind = "known_sample"
sample_ratios = [0.05, 0.2]
permutations = 49
"#;

#[test]
fn repeated_runs_are_byte_identical() {
    for text in [KNOWN_INPUT, KNOWN_SAMPLE] {
        let cfg = config(text);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        for format in [ReportFormat::Csv, ReportFormat::Json] {
            assert_eq!(render(&a, format).unwrap(), render(&b, format).unwrap());
        }
    }
}

#[test]
fn different_seeds_give_different_reports() {
    let a = run_experiment(&config(KNOWN_INPUT)).unwrap();
    let mut cfg = config(KNOWN_INPUT);
    cfg.seed += 1;
    let b = run_experiment(&cfg).unwrap();
    assert_ne!(a.rows, b.rows);
}

#[test]
fn one_row_per_repetition_and_one_aggregate_per_point() {
    let report = run_experiment(&config(KNOWN_INPUT)).unwrap();
    assert_eq!(report.rows.len(), 30);
    assert_eq!(report.aggregates.len(), 3);
    let csv = String::from_utf8(render(&report, ReportFormat::Csv).unwrap()).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_COLUMNS.join(","));
    assert_eq!(lines.iter().filter(|l| l.starts_with("rep,")).count(), 30);
    assert_eq!(
        lines.iter().filter(|l| l.starts_with("aggregate,")).count(),
        3
    );
    for (k, row) in report.rows.iter().enumerate() {
        assert_eq!((row.point, row.repetition), (k / 10, k % 10));
    }
}

#[test]
fn aggregates_are_recomputable_from_rows() {
    for text in [KNOWN_INPUT, KNOWN_SAMPLE] {
        let report = run_experiment(&config(text)).unwrap();
        assert_eq!(
            aggregate(&report.rows, &report.config.attack.sweep()),
            report.aggregates
        );
        for agg in &report.aggregates {
            let here: Vec<_> = report
                .rows
                .iter()
                .filter(|r| r.point == agg.point)
                .collect();
            let eps = here.iter().filter(|r| r.eps_breach).count() as f64 / here.len() as f64;
            assert_eq!(agg.eps_breach_fraction, eps);
        }
    }
}

#[test]
fn json_round_trip_preserves_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let report = run_experiment(&config(KNOWN_SAMPLE)).unwrap();
    emit_report(&report, ReportFormat::Json, &path).unwrap();
    let back = read_json_report(&path).unwrap();
    assert_eq!(back, report);
    assert_eq!(
        back.aggregates,
        aggregate(&back.rows, &back.config.attack.sweep())
    );
}

#[test]
fn empty_sweep_writes_only_the_header() {
    let text = KNOWN_INPUT.replace("known_inputs = [2, 4, 6]", "known_inputs = []");
    let report = run_experiment(&config(&text)).unwrap();
    assert!(report.rows.is_empty() && report.aggregates.is_empty());
    let csv = String::from_utf8(render(&report, ReportFormat::Csv).unwrap()).unwrap();
    assert_eq!(csv, format!("{}\n", CSV_COLUMNS.join(",")));
}

#[test]
fn unwritable_path_is_an_io_error() {
    let report = run_experiment(&config(KNOWN_SAMPLE)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("report.csv");
    assert!(matches!(
        emit_report(&report, ReportFormat::Csv, &path),
        Err(Error::Io(_))
    ));
}

#[test]
fn timings_appear_only_on_request() {
    let cfg = config(KNOWN_SAMPLE);
    let plain = run_experiment(&cfg).unwrap();
    assert!(plain.rows.iter().all(|r| r.timings.is_none()));
    let timed = run_experiment_with(&cfg, RunOptions { timings: true }).unwrap();
    assert!(timed
        .rows
        .iter()
        .all(|r| r.timings.is_some_and(|t| t.total_secs >= t.attack_secs)));
    // Everything else is unchanged.
    let strip = |mut rows: Vec<rigidleak_core::harness::RepetitionRow>| {
        rows.iter_mut().for_each(|r| r.timings = None);
        rows
    };
    assert_eq!(strip(timed.rows), plain.rows);
}

#[test]
fn breach_fraction_is_consistent_with_mean_rho() {
    let text = r#"
seed = 11
repetitions = 300
epsilon = 0.6
[data]
kind = "random_gaussian"
dim = 20
records = 40
[attack]
kind = "known_input"
known_inputs = [2, 4]
"#;
    let report = run_experiment(&config(text)).unwrap();
    for agg in &report.aggregates {
        let rho = agg.rho.unwrap().mean;
        // Away from the trivial ends, where the check would say nothing.
        assert!((0.2..0.95).contains(&rho), "{rho}");
        let tol = 3.0 * (rho * (1.0 - rho) / agg.repetitions as f64).sqrt();
        assert!(
            (agg.eps_breach_fraction - rho).abs() <= tol.max(1e-12),
            "a={}: fraction {} vs rho {rho} (tol {tol})",
            agg.parameter,
            agg.eps_breach_fraction
        );
    }
}

#[test]
fn translated_known_input_with_one_record_is_infeasible() {
    let text = format!("{KNOWN_INPUT}\n[perturbation]\nwith_translation = true\n")
        .replace("[2, 4, 6]", "[1, 7]");
    let report = run_experiment(&config(&text)).unwrap();
    let first: Vec<_> = report.rows.iter().filter(|r| r.point == 0).collect();
    assert!(first.iter().all(|r| r.status == Status::Infeasible
        && r.reason == Some(Reason::NoUniqueLink)
        && !r.eps_breach));
    assert_eq!(report.aggregates[0].feasible, 0);
    let second: Vec<_> = report.rows.iter().filter(|r| r.point == 1).collect();
    assert!(second
        .iter()
        .all(|r| r.status == Status::Ok && r.rho == Some(1.0) && r.eps_breach));
}

#[test]
fn known_inputs_are_nested_across_the_sweep() {
    // More known inputs never link fewer records on the same repetition.
    let report = run_experiment(&config(KNOWN_INPUT)).unwrap();
    for rep in 0..10 {
        let linked: Vec<usize> = report
            .rows
            .iter()
            .filter(|r| r.repetition == rep)
            .map(|r| r.linked.unwrap())
            .collect();
        assert!(linked.windows(2).all(|w| w[0] <= w[1]), "{linked:?}");
    }
}

#[test]
fn csv_dataset_is_split_into_sample_and_release() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "label,a,b,c").unwrap();
    let mut state = 1u64;
    for i in 0..400 {
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64
        };
        let (a, b, c) = (next(), next(), next());
        writeln!(
            f,
            "{},{},{},{}",
            i % 3,
            10.0 * a * a,
            3.0 * b + a,
            c.powi(3)
        )
        .unwrap();
    }
    drop(f);
    let text = format!(
        r#"
seed = 3
repetitions = 2
epsilon = 0.1
[data]
kind = "csv"
path = "{}"
has_header = true
columns = [1, 2, 3]
[attack]
kind = "known_sample"
sample_ratios = [0.25]
permutations = 19
"#,
        path.display()
    );
    let report = run_experiment(&config(&text)).unwrap();
    assert_eq!((report.attributes, report.records), (3, 400));
    assert!(report.rows.iter().all(|r| r.sample_size == Some(100)));
    assert!(report
        .rows
        .iter()
        .all(|r| r.record_breach_fraction.is_some()));
}

#[test]
fn ingestion_examples() {
    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("small.csv");
    std::fs::write(&small, "1,2\n3,4\n5,6\n").unwrap();
    let d = ingest_csv(&small, false, false, None).unwrap();
    assert_eq!((d.attributes(), d.records()), (2, 3));

    let dups = dir.path().join("dups.csv");
    std::fs::write(&dups, "x,y\n1,2\n1,2\n3,4\n1,2\n").unwrap();
    assert_eq!(ingest_csv(&dups, true, true, None).unwrap().records(), 2);
    assert_eq!(ingest_csv(&dups, true, false, None).unwrap().records(), 4);

    let letter = dir.path().join("letter.csv");
    let rows: String = (0..5)
        .map(|i| {
            let vals: Vec<String> = (0..16).map(|k| ((i + k) % 16).to_string()).collect();
            format!("{},{}\n", ["A", "B", "C", "D", "E"][i], vals.join(","))
        })
        .collect();
    std::fs::write(&letter, rows).unwrap();
    let cols: Vec<usize> = (1..=16).collect();
    assert_eq!(
        ingest_csv(&letter, false, true, Some(&cols))
            .unwrap()
            .attributes(),
        16
    );

    let ragged = dir.path().join("ragged.csv");
    std::fs::write(&ragged, "1,2\n3\n").unwrap();
    assert!(matches!(
        ingest_csv(&ragged, false, false, None),
        Err(Error::Parse { row: 2, .. })
    ));
    let text = dir.path().join("text.csv");
    std::fs::write(&text, "1,2\n3,oops\n").unwrap();
    assert!(matches!(
        ingest_csv(&text, false, false, None),
        Err(Error::Parse {
            row: 2,
            column: 2,
            ..
        })
    ));
}

#[test]
fn invalid_configs_are_rejected() {
    let cases = [
        KNOWN_INPUT.replace("repetitions = 10", "repetitions = 0"),
        KNOWN_INPUT.replace("epsilon = 0.3", "epsilon = -1.0"),
        KNOWN_INPUT.replace("[2, 4, 6]", "[0, 4]"),
        KNOWN_INPUT.replace("dim = 6", "dim = 6\nextra = 1"),
        KNOWN_SAMPLE.replace("[0.05, 0.2]", "[0.0]"),
        KNOWN_SAMPLE.replace("permutations = 49", "permutations = 0"),
        KNOWN_SAMPLE.replace("records = 600", "records = 1"),
        KNOWN_SAMPLE.replace("[0.5, 2.5, 75.0]]", "]"),
    ];
    for text in &cases {
        assert!(
            matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config(_))),
            "{text}"
        );
    }
}

#[test]
fn config_survives_a_toml_round_trip() {
    let cfg = config(KNOWN_SAMPLE);
    assert_eq!(config(&cfg.to_toml_string().unwrap()), cfg);
}
