mod common;

use std::fs::File;
use std::io::BufReader;

use proptest::prelude::*;
use pvsignal::ingest::*;

use common::fixture;

fn open(name: &str) -> BufReader<File> {
    BufReader::new(File::open(fixture(name)).unwrap())
}

fn drugs(r: &Report) -> Vec<(&str, Role)> {
    r.drugs.iter().map(|d| (d.normalized_name.as_str(), d.role)).collect()
}

#[test]
fn faers_fixture_parses_field_exact() {
    let sources = FaersSources {
        drug: open("faers_drug.txt"),
        reac: open("faers_reac.txt"),
        demo: Some(open("faers_demo.txt")),
    };
    let parsed = parse_faers(sources, &FaersColumns::faers(), ParseOptions::default()).unwrap();
    let r = &parsed.reports;
    assert_eq!(r.len(), 5);
    assert_eq!(parsed.stats.rejects, 0);
    assert_eq!(parsed.stats.unknown_roles, 1);

    assert_eq!(r[0].report_id, "1001");
    assert_eq!(r[0].event_date, Some(ReportDate::quarter(2013, 2)));
    assert_eq!(drugs(&r[0]), vec![("aspirin", Role::PrimarySuspect), ("lipitor_20_mg", Role::Concomitant)]);
    assert_eq!(r[0].adverse_events, vec!["Gastrointestinal haemorrhage", "Nausea"]);

    assert_eq!(r[1].event_date, Some(ReportDate::quarter(2012, 3)));
    assert_eq!(drugs(&r[1]), vec![("tylenol_pm", Role::PrimarySuspect)]);
    assert_eq!(r[1].adverse_events, vec!["Somnolence"]);

    assert_eq!(r[2].event_date, Some(ReportDate::year(2011)));
    assert_eq!(drugs(&r[2]), vec![("heparin", Role::PrimarySuspect), ("warfarin_sodium", Role::SecondarySuspect)]);
    assert_eq!(r[2].adverse_events, vec!["Haemorrhage"]);

    assert_eq!(r[3].event_date, None);
    assert_eq!(
        drugs(&r[3]),
        vec![
            ("humira_(adalimumab", Role::PrimarySuspect),
            ("aspirin", Role::Interacting),
            ("aspirin", Role::Concomitant)
        ]
    );
    assert_eq!(r[3].unique_drugs(), vec!["humira_(adalimumab", "aspirin"]);

    assert_eq!(r[4].event_date, Some(ReportDate::quarter(2019, 4)));
    assert_eq!(drugs(&r[4]), vec![("nexium_40mg", Role::Concomitant), ("advil", Role::PrimarySuspect)]);
    assert_eq!(r[4].drugs[0].raw_name, "NEXIUM 40MG.");
}

#[test]
fn faers_strict_mode_rejects_bad_sequence() {
    let drug = "h\n1$1$x$PS$A\n".as_bytes();
    let reac = "h\n1$1$Nausea\n".as_bytes();
    let lenient = parse_faers(
        FaersSources { drug, reac, demo: None },
        &FaersColumns::faers(),
        ParseOptions::default(),
    )
    .unwrap();
    assert_eq!(lenient.stats.rejects, 1);
    let strict = parse_faers(
        FaersSources { drug, reac, demo: None },
        &FaersColumns::faers(),
        ParseOptions { strict: true },
    );
    assert!(strict.is_err());
}

#[test]
fn dated_fixture_cutoff_keeps_exactly_earlier_reports() {
    let parsed = parse_canonical(open("dated_reports.tsv"), ParseOptions { strict: true }).unwrap();
    assert_eq!(parsed.reports.len(), 10);
    let kept: Vec<String> = filter_reports(parsed.reports.clone(), RoleFilter::Full, Some(ReportDate::year(2013)))
        .map(|r| r.report_id)
        .collect();
    assert_eq!(kept, vec!["R01", "R02", "R03", "R04", "R05", "R06"]);

    let ps: Vec<String> = filter_reports(parsed.reports, RoleFilter::PrimarySuspect, Some(ReportDate::quarter(2013, 2)))
        .map(|r| r.report_id)
        .collect();
    // R04 has only an SS drug; R06 falls after 2013Q2.
    assert_eq!(ps, vec!["R01", "R02", "R03", "R05"]);
}

#[test]
fn ps_filter_keeps_only_primary_suspects() {
    let mut r = Report::new("x");
    r.push_drug(DrugMention::new("d1", Role::PrimarySuspect));
    r.push_drug(DrugMention::new("d2", Role::Concomitant));
    r.push_event("a1");
    let out: Vec<Report> = filter_reports(vec![r], RoleFilter::PrimarySuspect, None).collect();
    assert_eq!(drugs(&out[0]), vec![("d1", Role::PrimarySuspect)]);

    let mut c_only = Report::new("y");
    c_only.push_drug(DrugMention::new("d2", Role::Concomitant));
    c_only.push_event("a1");
    assert_eq!(filter_reports(vec![c_only], RoleFilter::PrimarySuspect, None).count(), 0);
}

#[test]
fn join_and_empty_inputs() {
    let drug = "h\n100$1$1$PS$A\n100$1$2$C$B\n".as_bytes();
    let reac = "h\n100$1$Rash\n".as_bytes();
    let parsed = parse_faers(FaersSources { drug, reac, demo: None }, &FaersColumns::faers(), ParseOptions::default()).unwrap();
    assert_eq!(parsed.reports.len(), 1);
    assert_eq!(parsed.reports[0].drugs.len(), 2);
    assert_eq!(parsed.reports[0].adverse_events.len(), 1);

    let empty = parse_canonical("".as_bytes(), ParseOptions::default()).unwrap();
    assert!(empty.reports.is_empty());
    assert_eq!(empty.stats.rejects, 0);
}

fn arb_name() -> impl Strategy<Value = String> {
    prop_oneof![
        any::<String>(),
        "[ A-Za-z0-9_.,;:()*/\\-\t]{0,24}",
        "[a-z]{1,8}( [A-Z]{1,5}){0,3}[.!?]{0,3}",
    ]
}

fn arb_report() -> impl Strategy<Value = Report> {
    (
        "[A-Za-z0-9]{1,8}",
        prop::option::of((2004u16..2020, prop::option::of(1u8..=4))),
        prop::collection::vec(("[A-Za-z][A-Za-z0-9 ._()-]{0,12}", 0usize..4), 0..5),
        prop::collection::vec("[A-Z][a-z]{0,8}( [a-z]{1,6}){0,2}", 0..4),
    )
        .prop_map(|(id, date, ds, es)| {
            let roles = [Role::PrimarySuspect, Role::SecondarySuspect, Role::Concomitant, Role::Interacting];
            let mut r = Report::new(id);
            r.event_date = date.map(|(y, q)| ReportDate { year: y, quarter: q });
            for (name, role) in ds {
                r.push_drug(DrugMention::new(&name, roles[role]));
            }
            for e in es {
                r.push_event(&e);
            }
            r
        })
}

fn canonical_round_trip(reports: &[Report]) -> Vec<Report> {
    let mut buf = Vec::new();
    write_canonical(&mut buf, reports).unwrap();
    parse_canonical(&buf[..], ParseOptions { strict: true }).unwrap().reports
}

/// A report with raw drug strings dropped.
type Stripped = (String, Option<ReportDate>, Vec<(String, Role)>, Vec<String>);

fn without_raw(reports: &[Report]) -> Vec<Stripped> {
    reports
        .iter()
        .map(|r| {
            (
                r.report_id.clone(),
                r.event_date,
                r.drugs.iter().map(|d| (d.normalized_name.clone(), d.role)).collect(),
                r.adverse_events.clone(),
            )
        })
        .collect()
}

proptest! {
    #[test]
    fn normalization_is_idempotent(raw in arb_name()) {
        let once = normalize_drugname(&raw);
        prop_assert_eq!(normalize_drugname(&once), once.clone());
    }

    #[test]
    fn normalized_names_have_no_spaces_or_trailing_punctuation(raw in arb_name()) {
        let n = normalize_drugname(&raw);
        prop_assert!(!n.contains(char::is_whitespace));
        prop_assert_eq!(n.to_lowercase(), n.clone());
        if let Some(last) = n.chars().last() {
            prop_assert!(last.is_ascii_lowercase() || last.is_ascii_digit() || last == '_');
        }
        if raw.chars().any(|c| c.is_ascii_alphanumeric()) {
            prop_assert!(!n.is_empty());
        }
    }

    #[test]
    fn canonical_serialization_is_a_fixed_point(reports in prop::collection::vec(arb_report(), 0..8)) {
        // Distinct ids so the parser does not merge lines.
        let mut reports = reports;
        for (i, r) in reports.iter_mut().enumerate() {
            r.report_id = format!("{}-{i}", r.report_id);
        }
        let once = canonical_round_trip(&reports);
        let twice = canonical_round_trip(&once);
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(without_raw(&once), without_raw(&reports));
    }

    #[test]
    fn full_filter_without_cutoff_is_identity(reports in prop::collection::vec(arb_report(), 0..8)) {
        let eligible: Vec<Report> = reports
            .into_iter()
            .filter(|r| !r.drugs.is_empty() && !r.adverse_events.is_empty())
            .collect();
        let out: Vec<Report> = filter_reports(eligible.clone(), RoleFilter::Full, None).collect();
        prop_assert_eq!(out, eligible);
    }
}
