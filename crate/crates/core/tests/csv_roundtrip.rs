use trotteropt::dense::TrotterOrder;
use trotteropt::experiments::output::write_sweep_csv;
use trotteropt::experiments::sweep::sweep_prepared;
use trotteropt::experiments::{ratio, Prepared};
use trotteropt::model::{Connectivity, CouplingSpec};
use trotteropt::{Execution, OptimizerSettings};

fn parse(s: &str) -> Option<f64> {
    if s.is_empty() {
        None
    } else {
        Some(s.parse().unwrap())
    }
}

#[test]
fn ratio_columns_recompute_from_the_file() {
    let prep = Prepared::new(&CouplingSpec::tfim(Connectivity::Lattice { nx: 4, ny: 1, periodic: false }, 11)).unwrap();
    let points = [0.02, 0.1, 0.3, 0.7];
    let settings = OptimizerSettings {
        restarts: 2,
        ..Default::default()
    };
    let out = sweep_prepared(&prep, 3, &points, &TrotterOrder::ALL, &settings, Execution::Parallel, 1 << 30).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    write_sweep_csv(&path, &out.records).unwrap();

    let mut reader = csv::Reader::from_path(&path).unwrap();
    let mut n = 0;
    for (row, rec) in reader.records().zip(&out.records) {
        let row = row.unwrap();
        let col = |name: &str| parse(&row[reader_index(name)]);
        // every float survives the text round trip bit for bit
        assert_eq!(col("t").unwrap(), rec.t);
        assert_eq!(col("c_opt").unwrap(), rec.c_opt);
        assert_eq!(col("eps_var"), rec.eps_var);

        let e1 = col("eps_trotter_q1").unwrap();
        assert_eq!(col("r_eps").unwrap(), ratio(e1, col("eps_var").unwrap()));
        assert_eq!(col("r_e").unwrap(), ratio(e1, col("e_opt").unwrap()));
        assert_eq!(
            col("r_bound").unwrap(),
            ratio(e1, col("c_opt").unwrap() + col("e_opt").unwrap())
        );
        let scaled = col("scaled_time").unwrap();
        assert!((scaled - prep.time_scale() * col("t").unwrap()).abs() <= 1e-15 * scaled);
        n += 1;
    }
    assert_eq!(n, points.len());
}

fn reader_index(name: &str) -> usize {
    trotteropt::experiments::output::sweep_header()
        .iter()
        .position(|h| h == name)
        .unwrap()
}
