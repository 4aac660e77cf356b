use std::path::PathBuf;

use lpp_core::io::{
    load_network, network_to_string, parse_network, report_json, report_table, save_network, write_report, IoError,
    NetworkFile, ReportFormat, Units,
};
use lpp_core::network::NetworkError;
use lpp_core::{fixtures, run_multistep, EnumerativeBackend, RunConfig, RunReport, Termination};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

#[test]
fn fixture_file_has_reference_dg_limits() {
    let net = load_network(data("fixture13.net")).unwrap();
    assert_eq!(net.buses.len(), 13);
    let dg: Vec<(String, f64)> = net
        .buses
        .iter()
        .filter(|b| b.is_root && b.id != "13")
        .map(|b| (b.id.clone(), b.gen_p_max * net.base_mva))
        .collect();
    assert_eq!(dg, vec![("4".to_string(), 0.7497), ("11".to_string(), 0.8302)]);
    assert!((net.total_load_p() * net.base_mva - 2.4353).abs() < 1e-12);
    assert!((net.buses[0].load_p - 0.2420).abs() < 1e-15);
    assert!((net.feeders[0].i_max - 2.8579).abs() < 5e-5);
}

#[test]
fn duplicate_feeder_id_is_named() {
    let text = fixtures::FIXTURE13.replace("\"F02\"", "\"F01\"");
    match parse_network(&text).unwrap_err() {
        IoError::Schema { field, message } => {
            assert_eq!(field, "feeders[1].id");
            assert!(message.contains("\"F01\""));
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn invalid_network_lists_offending_feeder() {
    let text = fixtures::FIXTURE13.replacen("\"r\": 0.08,\n      \"x\": 0.06", "\"r\": 0.0,\n      \"x\": 0.0", 1);
    assert_ne!(text, fixtures::FIXTURE13);
    match parse_network(&text).unwrap_err() {
        IoError::Network(NetworkError::Invalid(report)) => assert!(report.to_string().contains("F01"), "{report}"),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn garbage_reports_position() {
    assert!(matches!(parse_network("{\"name\": 3"), Err(IoError::Parse { line: 1, .. })));
}

#[test]
fn round_trips() {
    let net = fixtures::fixture13_restoration();
    let pu = network_to_string(&net, Units::PER_UNIT).unwrap();
    assert_eq!(parse_network(&pu).unwrap(), net);
    let eng = parse_network(&network_to_string(&net, Units::default()).unwrap()).unwrap();
    for (a, b) in net.feeders.iter().zip(&eng.feeders) {
        assert!((a.r - b.r).abs() <= 1e-12 * a.r && (a.i_max - b.i_max).abs() <= 1e-12 * a.i_max);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    save_network(&net, &path, Units::PER_UNIT).unwrap();
    assert_eq!(load_network(&path).unwrap(), net);
}

#[test]
fn schema_lists_every_file_field() {
    let schema: serde_json::Value = serde_json::from_str(fixtures::NETWORK_SCHEMA).unwrap();
    let file: NetworkFile = serde_json::from_str(fixtures::FIXTURE13).unwrap();
    let doc = serde_json::to_value(&file).unwrap();
    let props = &schema["properties"];
    for key in doc.as_object().unwrap().keys() {
        assert!(props.get(key).is_some(), "schema lacks {key}");
    }
    for key in doc["feeders"][0].as_object().unwrap().keys() {
        assert!(props["feeders"]["items"]["properties"].get(key).is_some(), "schema lacks feeder {key}");
    }
    for bus in doc["buses"].as_array().unwrap() {
        for key in bus.as_object().unwrap().keys() {
            assert!(props["buses"]["items"]["properties"].get(key).is_some(), "schema lacks bus {key}");
        }
    }
}

fn fixture_run() -> RunReport {
    run_multistep(&fixtures::fixture13(), &RunConfig::reconfiguration(), &EnumerativeBackend::default()).unwrap()
}

#[test]
fn table_has_one_row_per_iteration() {
    let report = fixture_run();
    let table = report_table(&report, true);
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].contains("Iteration") && lines[0].contains("E_p^m") && lines[0].contains("E_q^m"));
    assert_eq!(lines.len(), 1 + report.iterations.len());
    let col = |line: &str, i: usize| line.split_whitespace().nth(i).unwrap().parse::<f64>().unwrap();
    for pair in lines[1..].windows(2) {
        assert!(col(pair[1], 3) <= col(pair[0], 3) && col(pair[1], 4) <= col(pair[0], 4));
    }
    let kw = col(lines[1], 2);
    assert!((kw - report.iterations[0].solution.objective * 1000.0).abs() < 1e-3);

    let dir = tempfile::tempdir().unwrap();
    write_report(&report, dir.path().join("r.txt"), ReportFormat::Table).unwrap();
    write_report(&report, dir.path().join("r.json"), ReportFormat::Json).unwrap();
    let back: RunReport = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(back.iterations.len(), report.iterations.len());
    assert!(write_report(&report, dir.path().join("missing").join("r.txt"), ReportFormat::Table).is_err());
}

#[test]
fn empty_report_is_header_only() {
    let mut report = fixture_run();
    report.iterations.clear();
    report.termination = Termination::Infeasible;
    assert_eq!(report_table(&report, true).lines().count(), 1);
}

#[test]
fn restoration_table_adds_counts_section() {
    let net = fixtures::fixture13_restoration();
    let report = run_multistep(&net, &RunConfig::restoration(), &EnumerativeBackend::default()).unwrap();
    let table = report_table(&report, true);
    assert!(table.contains("Restored buses") && table.contains("Islands"));
    let last = table.lines().last().unwrap();
    let counts = report.last().unwrap().topology.unwrap();
    let fields: Vec<usize> = last.split_whitespace().map(|x| x.parse().unwrap()).collect();
    assert_eq!(fields[1..], [counts.feeders, counts.buses, counts.islands]);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let (a, b) = (fixture_run(), fixture_run());
    assert_eq!(report_json(&a, true), report_json(&b, true));
    assert_eq!(report_table(&a, true), report_table(&b, true));
}
