//! Headerless or `#`-headed comma-separated coordinates, one point per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::PointCloud;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<PointCloud<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file)
}

/// Parses points from CSV text. Lines starting with `#` and blank lines are
/// skipped; rows are numbered from 1 in error messages.
pub fn parse_csv<T: Scalar>(reader: impl Read) -> Result<PointCloud<T>> {
    let reader = BufReader::new(reader);
    let mut coords = Vec::new();
    let mut dim = None;
    for (idx, line) in reader.lines().enumerate() {
        let row = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut count = 0;
        for field in line.split(',') {
            let field = field.trim();
            let v: T = field.parse().map_err(|_| Error::Parse {
                row,
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    message: format!("`{field}` is not finite"),
                });
            }
            coords.push(v);
            count += 1;
        }
        match dim {
            None => dim = Some(count),
            Some(d) if d != count => {
                return Err(Error::Parse {
                    row,
                    message: format!("expected {d} fields, found {count}"),
                })
            }
            _ => {}
        }
    }
    let dim = dim.ok_or_else(|| Error::Parse {
        row: 0,
        message: "no data rows".into(),
    })?;
    PointCloud::from_flat(coords, dim)
}

pub fn save_csv<T: Scalar>(cloud: &PointCloud<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_csv(cloud, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a `# x1,...,xn` header followed by one row per point. Values use the
/// shortest representation that parses back to the same scalar.
pub fn write_csv<T: Scalar>(cloud: &PointCloud<T>, w: &mut impl Write) -> std::io::Result<()> {
    let header: Vec<String> = (1..=cloud.dim()).map(|i| format!("x{i}")).collect();
    writeln!(w, "# {}", header.join(","))?;
    for p in cloud.points() {
        let mut first = true;
        for v in p {
            if !first {
                w.write_all(b",")?;
            }
            write!(w, "{v}")?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_simple_rows() {
        let c: PointCloud<f64> = parse_csv("0,0\n1,0\n0,1\n".as_bytes()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.dim(), 2);
        let c: PointCloud<f64> = parse_csv("# x,y\n 0.5 , -2e-3\n".as_bytes()).unwrap();
        assert_eq!(c.point(0), &[0.5, -2e-3]);
    }

    #[test]
    fn reports_bad_rows() {
        match parse_csv::<f64>("1,x\n".as_bytes()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 1),
            other => panic!("{other:?}"),
        }
        match parse_csv::<f64>("# h\n1,2\n3\n".as_bytes()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_csv::<f64>("".as_bytes()),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_csv::<f64>("1,inf\n".as_bytes()),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let coords: Vec<f64> = (0..300).map(|_| rng.random_range(-10.0..10.0)).collect();
        let cloud = PointCloud::from_flat(coords, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.csv");
        save_csv(&cloud, &path).unwrap();
        let back: PointCloud<f64> = load_csv(&path).unwrap();
        assert_eq!(back, cloud);
        assert!(load_csv::<f64>(dir.path().join("missing.csv")).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(coords in prop::collection::vec(-1e300f64..1e300, 1..40), dim in 1usize..4) {
            let n = coords.len() / dim * dim;
            prop_assume!(n > 0);
            let cloud = PointCloud::from_flat(coords[..n].to_vec(), dim).unwrap();
            let mut buf = Vec::new();
            write_csv(&cloud, &mut buf).unwrap();
            let back: PointCloud<f64> = parse_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, cloud);
        }
    }
}
