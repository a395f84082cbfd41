use proptest::prelude::*;

use bdr_core::io::{decode_matrix_binary, encode_matrix_binary, parse_matrix_csv, read_matrix, write_matrix_csv};
use bdr_core::linalg::Matrix;

fn matrices() -> impl Strategy<Value = Matrix<f64>> {
    (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, r * c)
            .prop_map(move |v| Matrix::from_vec(r, c, v).unwrap())
    })
}

proptest! {
    #[test]
    fn csv_round_trip(m in matrices()) {
        let header: Vec<String> = (0..m.cols()).map(|j| format!("c{j}")).collect();
        let mut buf = b"# run-digest: 00ff\n".to_vec();
        write_matrix_csv(&mut buf, &m, Some(&header)).unwrap();
        let back: Matrix<f64> = parse_matrix_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn binary_round_trip(m in matrices()) {
        let back: Matrix<f64> = decode_matrix_binary(&encode_matrix_binary(&m)).unwrap();
        prop_assert_eq!(back, m);
    }
}

#[test]
fn files_in_either_format() {
    let dir = tempfile::tempdir().unwrap();
    let m = Matrix::<f64>::from_f64_rows(&[&[1.0, 2.0], &[-3.25, 1e-12]]);
    let bin = dir.path().join("a.bdr");
    std::fs::write(&bin, encode_matrix_binary(&m)).unwrap();
    assert_eq!(read_matrix::<f64>(&bin).unwrap(), m);
    let csv = dir.path().join("a.csv");
    write_matrix_csv(std::fs::File::create(&csv).unwrap(), &m, None).unwrap();
    assert_eq!(read_matrix::<f64>(&csv).unwrap(), m);
    std::fs::write(&csv, "1,2\nx,3\n").unwrap();
    assert!(read_matrix::<f64>(&csv).is_err());
    assert!(read_matrix::<f64>(&dir.path().join("missing.csv")).is_err());
}
