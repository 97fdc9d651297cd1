use std::path::Path;
use std::process::Command;

use codesign_cli::{analyze, cmd_analyze, cmd_plot, cmd_run, render, AnalysisKind, ExperimentConfig, PlotKind, RunOptions, Table};
use codesign_core::records::{read_records, write_records, StoredRecord};
use codesign_core::{AnalysisConfig, ConditionTag, DeltaMetric, EvalRecord, Vec2};

const TINY: &str = r#"{
  "layouts": [
    {"name": "blocked", "obstacles": [{"shape": "circle", "center": [-0.12, 0.18], "radius": 0.04}],
     "targets": [[0.1, 0.1], [-0.15, 0.05]]}
  ],
  "horizon": 30,
  "hidden": 4,
  "seeds": [0, 1],
  "ga": {"population": 6, "generations": 3}
}"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("cfg.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn record(condition: ConditionTag, target: Vec2, seed: u64, fe: f64) -> EvalRecord {
    EvalRecord {
        layout: "fx".into(),
        condition,
        target,
        seed,
        hidden: 4,
        param_count: 42,
        l1: 0.15,
        l2: 0.15,
        trajectory_error: fe,
        final_error: fe,
        success: fe < 0.05,
        collision_penalty: 0.0,
        collision_steps: 0,
        collided: false,
        best_loss: fe,
        best_loss_trace: vec![fe],
        error: None,
    }
}

fn stored(records: Vec<EvalRecord>) -> Vec<StoredRecord> {
    records.into_iter().map(|record| StoredRecord { record, config_hash: "h".into() }).collect()
}

fn svg_rects(svg: &str, class: &str) -> Vec<String> {
    let doc = roxmltree::Document::parse(svg).unwrap();
    doc.descendants()
        .filter(|n| n.tag_name().name() == "rect" && n.attribute("class") == Some(class))
        .map(|n| n.attribute("fill").unwrap().to_string())
        .collect()
}

#[test]
fn tiny_config_parses() {
    let cfg = ExperimentConfig::parse(TINY).unwrap();
    assert_eq!(cfg.layouts[0].targets.as_ref().unwrap().len(), 2);
}

#[test]
fn run_writes_paired_records_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let summary = cmd_run(&cfg, &RunOptions { out: out.clone(), ..RunOptions::default() }).unwrap();
    assert!(summary.all_ok());
    assert_eq!(summary.records.len(), 2 * 2 * 2);
    let back = read_records(std::fs::File::open(out.join("records.csv")).unwrap()).unwrap();
    assert_eq!(back.len(), 8);
    assert!(back.iter().all(|r| r.config_hash == summary.manifest.config_hash));
    assert!(out.join("manifest.json").exists());
    assert!(out.join("traces/blocked/co_design_t001_s1.csv").exists());
    assert!(out.join("champions/blocked/control_only_t000_s0.json").exists());

    // Same config, same bytes.
    let out2 = dir.path().join("out2");
    cmd_run(&cfg, &RunOptions { out: out2.clone(), ..RunOptions::default() }).unwrap();
    assert_eq!(std::fs::read(out.join("records.csv")).unwrap(), std::fs::read(out2.join("records.csv")).unwrap());

    // The full pipeline on real output.
    let table_path = dir.path().join("delta.csv");
    let table = cmd_analyze(&out.join("records.csv"), AnalysisKind::Delta, DeltaMetric::FinalError, &AnalysisConfig::default(), Some(&table_path)).unwrap();
    assert_eq!(table.rows.len(), 2);
    let svgs = cmd_plot(&table_path, PlotKind::Delta, Some(&cfg), &dir.path().join("fig")).unwrap();
    assert_eq!(svgs.len(), 1);
    let svg = std::fs::read_to_string(&svgs[0]).unwrap();
    assert_eq!(svg_rects(&svg, "cell").len(), 2);
    assert!(svg.contains(&summary.manifest.config_hash));
}

#[test]
fn single_condition_run_has_only_that_condition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let opts = RunOptions { out: dir.path().join("out"), condition: Some(ConditionTag::ControlOnly), ..RunOptions::default() };
    let s = cmd_run(&cfg, &opts).unwrap();
    assert_eq!(s.records.len(), 4);
    assert!(s.records.iter().all(|r| r.condition == ConditionTag::ControlOnly && r.l1 == 0.15 && r.l2 == 0.15));
    // Paired analyses refuse one-sided data.
    let err = cmd_analyze(&dir.path().join("out/records.csv"), AnalysisKind::Delta, DeltaMetric::FinalError, &AnalysisConfig::default(), Some(&dir.path().join("t.csv"))).unwrap_err();
    assert!(format!("{err:#}").contains("counterpart"), "{err:#}");
    // Per-condition analyses still work.
    cmd_analyze(&dir.path().join("out/records.csv"), AnalysisKind::Hist, DeltaMetric::FinalError, &AnalysisConfig::default(), Some(&dir.path().join("h.csv"))).unwrap();
}

#[test]
fn delta_sign_on_fixture() {
    let t = Vec2::new(0.1, 0.0);
    let recs = stored(vec![record(ConditionTag::ControlOnly, t, 0, 0.03), record(ConditionTag::CoDesign, t, 0, 0.02)]);
    let table = analyze(&recs, AnalysisKind::Delta, DeltaMetric::FinalError, &AnalysisConfig::default()).unwrap();
    let d: f64 = table.rows[0][table.column("delta").unwrap()].parse().unwrap();
    assert!((d - 0.01).abs() < 1e-15);

    // Positive delta renders red, i.e. red channel dominates.
    let svg = &render(&table, PlotKind::Delta, None).unwrap()[0].1;
    let fill = &svg_rects(svg, "cell")[0];
    let rgb = u32::from_str_radix(&fill[1..], 16).unwrap();
    assert!((rgb >> 16) & 0xff > rgb & 0xff, "{fill}");
}

#[test]
fn zero_delta_renders_grey() {
    let recs: Vec<EvalRecord> = (0..5)
        .flat_map(|i| {
            let t = Vec2::new(0.05 * i as f64, 0.1);
            [record(ConditionTag::ControlOnly, t, 0, 0.02), record(ConditionTag::CoDesign, t, 0, 0.02)]
        })
        .collect();
    let table = analyze(&stored(recs), AnalysisKind::Delta, DeltaMetric::FinalError, &AnalysisConfig::default()).unwrap();
    let svg = &render(&table, PlotKind::Delta, None).unwrap()[0].1;
    let fills = svg_rects(svg, "cell");
    assert_eq!(fills.len(), 5);
    assert!(fills.iter().all(|f| f == "#bdbdbd"), "{fills:?}");
}

#[test]
fn every_analysis_kind_round_trips_through_csv() {
    let mut recs = Vec::new();
    for i in 0..6 {
        let t = Vec2::new(0.05 * (i as f64 - 3.0), 0.1);
        for s in 0..3 {
            recs.push(record(ConditionTag::ControlOnly, t, s, 0.01 * (i + s as usize) as f64));
            recs.push(record(ConditionTag::CoDesign, t, s, 0.015 * i as f64));
        }
    }
    let recs = stored(recs);
    for kind in AnalysisKind::ALL {
        let table = analyze(&recs, kind, DeltaMetric::FinalError, &AnalysisConfig::default()).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert_eq!(Table::read_csv(buf.as_slice()).unwrap(), table);
        if let Ok(plot) = kind.as_str().parse::<PlotKind>() {
            let svgs = render(&table, plot, None).unwrap();
            roxmltree::Document::parse(&svgs[0].1).unwrap();
        }
    }
    // A table of one kind is not accepted as another.
    let hist = analyze(&recs, AnalysisKind::Hist, DeltaMetric::FinalError, &AnalysisConfig::default()).unwrap();
    assert!(render(&hist, PlotKind::Delta, None).is_err());
}

#[test]
fn unknown_kinds_list_the_valid_ones() {
    let err = "heatmap".parse::<PlotKind>().unwrap_err();
    assert!(err.contains("delta") && err.contains("ecdf"), "{err}");
    assert!("bogus".parse::<AnalysisKind>().unwrap_err().contains("winrate"));
}

#[test]
fn binary_reports_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{\n  \"layouts\": [{\"name\": \"x\"}],\n  \"horizn\": 5\n}");
    let out = Command::new(env!("CARGO_BIN_EXE_codesign")).args(["run"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("horizn") && stderr.contains("line 3"), "{stderr}");

    let out = Command::new(env!("CARGO_BIN_EXE_codesign")).args(["plot", "x.csv", "--kind", "pie"]).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("valid kinds"));
}

#[test]
fn binary_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let bin = env!("CARGO_BIN_EXE_codesign");
    let out = dir.path().join("out");
    let st = Command::new(bin).arg("run").arg(&cfg).arg("--out").arg(&out).arg("--seed-offset").arg("10").status().unwrap();
    assert!(st.success());
    let recs = read_records(std::fs::File::open(out.join("records.csv")).unwrap()).unwrap();
    assert!(recs.iter().all(|r| r.record.seed >= 10));
    let table = dir.path().join("ring.csv");
    let st = Command::new(bin).arg("analyze").arg(out.join("records.csv")).args(["--analysis", "ring", "--out"]).arg(&table).status().unwrap();
    assert!(st.success());
    let st = Command::new(bin).arg("plot").arg(&table).args(["--kind", "ring", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("fig")).status().unwrap();
    assert!(st.success());
    assert!(dir.path().join("fig/ring_blocked.svg").exists());
}

#[test]
fn records_file_with_bad_header_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.csv");
    std::fs::write(&p, "x,y\n1,2\n").unwrap();
    assert!(cmd_analyze(&p, AnalysisKind::Delta, DeltaMetric::FinalError, &AnalysisConfig::default(), None).is_err());
    let mut buf = Vec::new();
    write_records(&mut buf, &[], "h").unwrap();
    std::fs::write(&p, buf).unwrap();
    assert!(cmd_analyze(&p, AnalysisKind::Delta, DeltaMetric::FinalError, &AnalysisConfig::default(), None).is_err());
}

#[test]
fn single_target_seed_gives_one_trace_per_condition() {
    let dir = tempfile::tempdir().unwrap();
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/single_target.json");
    let mut value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(bundled).unwrap()).unwrap();
    value["seeds"] = serde_json::json!([0]);
    let cfg = write_config(dir.path(), &value.to_string());
    let out = dir.path().join("out");
    let s = cmd_run(&cfg, &RunOptions { out: out.clone(), ..RunOptions::default() }).unwrap();
    assert_eq!(s.records.len(), 2);
    let traces: Vec<_> = std::fs::read_dir(out.join("traces/single_target")).unwrap().collect();
    assert_eq!(traces.len(), 2);
}
