use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_greenbond"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const HEADER: &str = "\
create-account op
create-account iss
create-account reg
create-account inv
fund-algos op 10algos
fund-algos iss 10algos
fund-algos reg 10algos
fund-algos inv 10algos
issue GB operator=op issuer=iss verifier=iss regulator=reg bonds=10 rounds=1 start-buy=100 end-buy=200 maturity=300 cost=$100 coupon=$5 principal=$100
fund-stablecoin inv $1,000
opt-in inv GB
advance-time 100
";

#[test]
fn coupon_default_scenario_passes() {
    let path = scenarios().join("coupon_default.scn");
    let o = run(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let last_claim = out.lines().find(|l| l.starts_with("STEP 40 ")).unwrap();
    assert!(last_claim.ends_with("obligations require 1500000000 (txn 1))"), "{last_claim}");
    assert!(last_claim.contains("-> REJECTED(app-rejected: "));
}

#[test]
fn transcripts_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenarios().join("lifecycle.scn");
    let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    for t in [&a, &b] {
        let o = run(&["run", path.to_str().unwrap(), "--deltas", "--transcript", t.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    assert!(String::from_utf8(ta).unwrap().contains("    investor GB: 0 -> 5000000"));
}

#[test]
fn buying_before_approval_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{HEADER}buy inv GB 1bond\nassert rejected\nassert bond-balance inv GB == 0\n");
    let o = run(&["run", &write(dir.path(), "s.scn", &text)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn failed_assertion_exits_1_and_stops() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{HEADER}assert algo-balance inv == 1\nadvance-time 150\n");
    let o = run(&["run", &write(dir.path(), "s.scn", &text)]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.trim_end().ends_with("-> REJECTED(assertion failed: algo balance of inv is 9997000, expected == 1)"), "{out}");
    assert!(!out.contains("advance-time 150"));
}

#[test]
fn parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for bad in ["fund-algos ghost 5", "launch rockets", "advance-time 5\nadvance-time 4", "create-account a\nassert algo-balance a ~ 3"] {
        let o = run(&["run", &write(dir.path(), "bad.scn", bad)]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
        assert!(o.stdout.is_empty());
    }
    assert_eq!(run(&["run", "/nonexistent/x.scn"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn empty_scenario_gives_empty_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", &write(dir.path(), "empty.scn", "# nothing here\n")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "");
}

#[test]
fn costs_table_lists_protocol_totals() {
    let path = scenarios().join("lifecycle.scn");
    let o = run(&["costs", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("protocol total 336000"));
    assert!(out.contains("protocol total 11000"));
    assert!(out.contains("Deploy Main App"));
}

#[test]
fn price_curve_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let args = ["price-curve", "--face", "100", "--rate", "0.05", "--sweep", "T", "--values", "5,10,15,20", "--out"];
    let o = run(&[&args[..], &[out.to_str().unwrap()]].concat());
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rating,sweep_value,price");
    assert_eq!(lines.len(), 21);
    assert!(!text.contains('\r'));
    let again = run(&args[..args.len() - 1]);
    assert_eq!(stdout(&again), text);

    let zero = run(&["price-curve", "--face", "100", "--rate", "5%", "--coupon-rates", "0", "--periods", "10"]);
    let prices: Vec<String> = stdout(&zero).lines().skip(1).map(|l| l.rsplit(',').next().unwrap().to_owned()).collect();
    assert_eq!(prices.len(), 5);
    assert!(prices.iter().all(|p| *p == prices[0]));

    assert_eq!(run(&["price-curve", "--face", "100", "--rate", "0.05", "--values", "x"]).status.code(), Some(2));
    assert_eq!(run(&["price-curve", "--face", "100", "--rate", "0.05", "--sweep", "coupon-rate", "--values", "0.1"]).status.code(), Some(2));
}

#[test]
fn report_put_get_list() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let store = store.to_str().unwrap();
    let doc = write(dir.path(), "r.txt", "use of proceeds: solar farm\n");
    let put = run(&["report", "put", &doc, "--store", store]);
    assert_eq!(put.status.code(), Some(0));
    let cid = stdout(&put).trim().to_owned();
    assert_eq!(cid.len(), 64);
    assert_eq!(stdout(&run(&["report", "put", &doc, "--store", store])).trim(), cid);

    let got = run(&["report", "get", &cid, "--store", store]);
    assert_eq!(stdout(&got), "use of proceeds: solar farm\n");
    let out = dir.path().join("copy.txt");
    run(&["report", "get", &cid, "--store", store, "--out", out.to_str().unwrap()]);
    assert_eq!(std::fs::read_to_string(out).unwrap(), "use of proceeds: solar farm\n");

    let unknown = "0".repeat(64);
    assert_eq!(run(&["report", "get", &unknown, "--store", store]).status.code(), Some(1));
    assert_eq!(run(&["report", "put", "/nonexistent", "--store", store]).status.code(), Some(1));

    let text = format!("{HEADER}report-put R1 r.txt\nreport-anchor iss GB R1\nreport-put R2 inline:second\nreport-anchor inv GB R2\nreport-anchor iss GB R2\n");
    let scn = write(dir.path(), "s.scn", &text);
    let listed = run(&["report", "list", &scn, "iss", "GB"]);
    assert_eq!(listed.status.code(), Some(0), "{}", String::from_utf8_lossy(&listed.stderr));
    let inline = greenbond::reports::ContentId::of(b"second");
    assert_eq!(stdout(&listed), format!("{cid}\n{inline}\n"));
}
