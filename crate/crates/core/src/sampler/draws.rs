use std::collections::HashSet;
use std::io::{Read, Write};

use crate::{Error, Result};

/// Column prefixes that mark latent variables in imported CSV draws.
pub const LATENT_PREFIXES: [&str; 2] = ["eta.", "f."];

/// `S` posterior draws: parameter columns followed by latent columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawMatrix {
    param_names: Vec<String>,
    latent_names: Vec<String>,
    values: Vec<f64>,
    seed: u64,
    model_tag: String,
}

impl DrawMatrix {
    /// `values` is row-major with `param_names.len() + latent_names.len()`
    /// entries per draw.
    pub fn new(
        param_names: Vec<String>,
        latent_names: Vec<String>,
        values: Vec<f64>,
        seed: u64,
        model_tag: impl Into<String>,
    ) -> Result<Self> {
        let ncols = param_names.len() + latent_names.len();
        if ncols == 0 {
            return Err(Error::Draws("no columns".into()));
        }
        let mut seen = HashSet::new();
        for name in param_names.iter().chain(&latent_names) {
            if name.is_empty() || name.contains([',', '"', '\n', '\r']) {
                return Err(Error::Draws(format!("invalid column name {name:?}")));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Draws(format!("duplicate column {name:?}")));
            }
        }
        if values.is_empty() || values.len() % ncols != 0 {
            return Err(Error::Draws(format!(
                "{} values do not form whole rows of {ncols} columns",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Draws(format!(
                "non-finite value at draw {}, column {}",
                i / ncols + 1,
                i % ncols + 1
            )));
        }
        Ok(DrawMatrix { param_names, latent_names, values, seed, model_tag: model_tag.into() })
    }

    pub fn n_draws(&self) -> usize {
        self.values.len() / self.n_cols()
    }

    pub fn n_cols(&self) -> usize {
        self.param_names.len() + self.latent_names.len()
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    pub fn latent_names(&self) -> &[String] {
        &self.latent_names
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.param_names.iter().chain(&self.latent_names).map(String::as_str)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Full row `s` (parameters then latents).
    pub fn row(&self, s: usize) -> &[f64] {
        let c = self.n_cols();
        &self.values[s * c..(s + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols())
    }

    /// Parameter coordinates of draw `s`.
    pub fn params(&self, s: usize) -> &[f64] {
        &self.row(s)[..self.param_names.len()]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names().position(|n| n == name)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    pub fn column_mean(&self, j: usize) -> f64 {
        self.column(j).sum::<f64>() / self.n_draws() as f64
    }

    /// Row-major `S × L` copy of the selected latent columns (all of them
    /// when `names` is `None`).
    pub fn latent_matrix(&self, names: Option<&[String]>) -> Result<(Vec<f64>, usize)> {
        let offset = self.param_names.len();
        let idx: Vec<usize> = match names {
            None => (offset..self.n_cols()).collect(),
            Some(sel) => sel
                .iter()
                .map(|n| {
                    self.latent_names
                        .iter()
                        .position(|l| l == n)
                        .map(|p| p + offset)
                        .ok_or_else(|| Error::invalid(format!("no latent column named {n:?}")))
                })
                .collect::<Result<_>>()?,
        };
        if idx.is_empty() {
            return Err(Error::invalid("draws carry no latent columns"));
        }
        let mut out = Vec::with_capacity(self.n_draws() * idx.len());
        for r in self.rows() {
            out.extend(idx.iter().map(|&j| r[j]));
        }
        Ok((out, idx.len()))
    }

    /// Header of column names, then one draw per line, each value written
    /// with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<&str> = self.column_names().collect();
        writeln!(w, "{}", header.join(","))?;
        let mut line = String::new();
        for r in self.rows() {
            line.clear();
            for (j, v) in r.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&format_17(*v));
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    /// Parse draws; columns starting with `eta.` or `f.` are latent, the
    /// rest are parameters. Relative order within each group is kept.
    pub fn read_csv<R: Read>(r: R, model_tag: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Draws(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        let is_latent: Vec<bool> = header
            .iter()
            .map(|h| LATENT_PREFIXES.iter().any(|p| h.starts_with(p)))
            .collect();
        let param_idx: Vec<usize> = (0..header.len()).filter(|&j| !is_latent[j]).collect();
        let latent_idx: Vec<usize> = (0..header.len()).filter(|&j| is_latent[j]).collect();
        let order: Vec<usize> = param_idx.iter().chain(&latent_idx).copied().collect();

        let mut values = Vec::new();
        let mut row = vec![0.0; header.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Draws(e.to_string()))?;
            if rec.len() != header.len() {
                return Err(Error::Draws(format!(
                    "draw {} has {} fields, header has {}",
                    line + 1,
                    rec.len(),
                    header.len()
                )));
            }
            for (j, field) in rec.iter().enumerate() {
                row[j] = field.parse::<f64>().map_err(|_| {
                    Error::Draws(format!("draw {}, column {:?}: not a number: {field:?}", line + 1, header[j]))
                })?;
            }
            values.extend(order.iter().map(|&j| row[j]));
        }
        if values.is_empty() {
            return Err(Error::Draws("no draws".into()));
        }
        DrawMatrix::new(
            param_idx.iter().map(|&j| header[j].clone()).collect(),
            latent_idx.iter().map(|&j| header[j].clone()).collect(),
            values,
            0,
            model_tag,
        )
    }
}

/// Scientific notation with 17 significant digits; parses back to the same
/// `f64`.
pub(crate) fn format_17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> DrawMatrix {
        DrawMatrix::new(
            vec!["alpha".into(), "beta".into()],
            vec!["eta.1".into()],
            vec![1.5, 2.0, 0.1, 0.3, 1e-300, 0.99],
            7,
            "test",
        )
        .unwrap()
    }

    #[test]
    fn accessors() {
        let d = small();
        assert_eq!(d.n_draws(), 2);
        assert_eq!(d.params(1), &[0.3, 1e-300]);
        assert_eq!(d.column(2).collect::<Vec<_>>(), vec![0.1, 0.99]);
        let (lat, l) = d.latent_matrix(None).unwrap();
        assert_eq!((lat, l), (vec![0.1, 0.99], 1));
        assert!(d.latent_matrix(Some(&["eta.9".to_string()])).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DrawMatrix::new(vec!["a".into()], vec![], vec![], 0, "t").is_err());
        assert!(DrawMatrix::new(vec!["a".into(), "b".into()], vec![], vec![1.0], 0, "t").is_err());
        assert!(DrawMatrix::new(vec!["a".into()], vec![], vec![f64::NAN], 0, "t").is_err());
        assert!(DrawMatrix::new(vec!["a".into(), "a".into()], vec![], vec![1.0, 2.0], 0, "t").is_err());
    }

    #[test]
    fn csv_layout() {
        let text = small().to_csv_string();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("alpha,beta,eta.1"));
        assert_eq!(lines.next(), Some("1.5000000000000000e0,2.0000000000000000e0,1.0000000000000001e-1"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn import_groups_latent_columns_after_parameters() {
        let text = "f.1,sigma2,f.2,tau2\n0.5,1.0,0.25,2.0\n";
        let d = DrawMatrix::read_csv(text.as_bytes(), "ext").unwrap();
        assert_eq!(d.param_names(), &["sigma2", "tau2"]);
        assert_eq!(d.latent_names(), &["f.1", "f.2"]);
        assert_eq!(d.row(0), &[1.0, 2.0, 0.5, 0.25]);
    }

    #[test]
    fn import_errors() {
        assert!(DrawMatrix::read_csv("a,b\n1,x\n".as_bytes(), "t").is_err());
        assert!(DrawMatrix::read_csv("a,b\n".as_bytes(), "t").is_err());
        assert!(DrawMatrix::read_csv("a,b\n1,2,3\n".as_bytes(), "t").is_err());
        assert!(DrawMatrix::read_csv("a\nnan\n".as_bytes(), "t").is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_byte_identical(
            vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 3..60)
        ) {
            let n = vals.len() / 3 * 3;
            let d = DrawMatrix::new(
                vec!["mu".into()],
                vec!["eta.1".into(), "eta.2".into()],
                vals[..n].to_vec(),
                0,
                "p",
            ).unwrap();
            let text = d.to_csv_string();
            let back = DrawMatrix::read_csv(text.as_bytes(), "p").unwrap();
            prop_assert_eq!(back.values(), d.values());
            prop_assert_eq!(back.to_csv_string(), text);
        }
    }
}
