//! Seeded desk-scale datasets standing in for the UCI tables.
//!
//! * `blobs`: two Gaussian blobs in 2-D plus two noise columns.
//! * `cancer`: 30 correlated measurements of four latent factors, label
//!   from a mostly linear rule with one interaction.
//! * `mushroom`: purely categorical, label a deterministic rule of two
//!   columns, so well-trained models always agree.
//! * `manifold`: numeric and categorical views of a 2-D latent sheet with a
//!   curved, noisy decision boundary.
//! * `helix`: eight numeric nonlinear views of a 2-D latent sheet, label
//!   above a sinusoidal boundary.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::schema::{ColumnKind, ColumnSpec, FeatureSchema};
use super::table::{RawColumn, RawTable};
use crate::{seed, Error, Result};

pub const NAMES: [&str; 5] = ["blobs", "cancer", "mushroom", "manifold", "helix"];

pub fn by_name(name: &str, rows: usize, seed: u64) -> Result<RawTable> {
    if rows < 2 {
        return Err(Error::InvalidConfig("synthetic datasets need at least 2 rows".into()));
    }
    match name {
        "blobs" => Ok(blobs(rows, seed)),
        "cancer" => Ok(cancer(rows, seed)),
        "mushroom" => Ok(mushroom(rows, seed)),
        "manifold" => Ok(manifold(rows, seed)),
        "helix" => Ok(helix(rows, seed)),
        other => Err(Error::InvalidConfig(format!("unknown synthetic dataset `{other}` (known: {NAMES:?})"))),
    }
}

fn gauss(rng: &mut seed::Rng) -> f64 {
    StandardNormal.sample(rng)
}

struct Builder {
    specs: Vec<ColumnSpec>,
    columns: Vec<RawColumn>,
}

impl Builder {
    fn new() -> Self {
        Self { specs: Vec::new(), columns: Vec::new() }
    }

    fn numeric(&mut self, name: &str, values: Vec<f64>) {
        self.specs.push(ColumnSpec::numeric(name));
        self.columns.push(RawColumn::Numeric(values));
    }

    fn categorical(&mut self, name: &str, modalities: &[&str], codes: Vec<usize>) {
        self.specs.push(ColumnSpec::categorical(name, modalities.iter().copied()));
        self.columns.push(RawColumn::Categorical(codes));
    }

    fn finish(mut self, classes: &[&str], labels: Vec<usize>) -> RawTable {
        self.specs.push(ColumnSpec::label("label", classes.iter().copied()));
        self.columns.push(RawColumn::Categorical(labels));
        let rows = self.columns[0].len();
        RawTable { schema: FeatureSchema::new(self.specs).expect("generator schema"), columns: self.columns, rows }
    }
}

pub fn blobs(rows: usize, seed: u64) -> RawTable {
    let mut rng = seed::rng(seed);
    let mut cols = vec![Vec::with_capacity(rows); 4];
    let mut labels = Vec::with_capacity(rows);
    for i in 0..rows {
        let y = i % 2;
        let centre = if y == 0 { -1.5 } else { 1.5 };
        cols[0].push(centre + 0.8 * gauss(&mut rng));
        cols[1].push(-centre + 0.8 * gauss(&mut rng));
        cols[2].push(gauss(&mut rng));
        cols[3].push(rng.random_range(-1.0..1.0));
        labels.push(y);
    }
    let mut b = Builder::new();
    for (i, c) in cols.into_iter().enumerate() {
        b.numeric(&format!("x{i}"), c);
    }
    b.finish(&["a", "b"], labels)
}

/// 30 measurements mixing 4 latent tissue properties through a fixed
/// loading matrix, so the data lies near a 4-dimensional subspace.
pub fn cancer(rows: usize, seed: u64) -> RawTable {
    let mut load_rng = seed::rng(0x00CA_4CE2);
    let loadings: Vec<[f64; 4]> = (0..30)
        .map(|_| {
            let mut row = [0.0; 4];
            row.iter_mut().for_each(|w| *w = gauss(&mut load_rng));
            row
        })
        .collect();
    let mut rng = seed::rng(seed);
    let mut cols = vec![Vec::with_capacity(rows); 30];
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let z: Vec<f64> = (0..4).map(|_| gauss(&mut rng)).collect();
        for (col, w) in cols.iter_mut().zip(&loadings) {
            let v: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
            col.push(v + 0.05 * gauss(&mut rng));
        }
        let score = 2.0 * z[0] + 1.5 * z[1] - z[2] + 0.7 * z[2] * z[3] + 0.4 * gauss(&mut rng);
        labels.push(usize::from(score > 0.0));
    }
    let mut b = Builder::new();
    for (k, c) in cols.into_iter().enumerate() {
        b.numeric(&format!("m{k:02}"), c);
    }
    b.finish(&["benign", "malignant"], labels)
}

pub fn mushroom(rows: usize, seed: u64) -> RawTable {
    const ODOR: [&str; 6] = ["almond", "anise", "none", "foul", "fishy", "spicy"];
    const SPORE: [&str; 4] = ["black", "brown", "green", "white"];
    const CAP: [&str; 4] = ["bell", "conical", "convex", "flat"];
    const COLOR: [&str; 5] = ["brown", "buff", "gray", "red", "white"];
    const RING: [&str; 3] = ["none", "one", "two"];
    const HABITAT: [&str; 4] = ["grass", "leaves", "paths", "woods"];
    let mut rng = seed::rng(seed);
    let mut cols: Vec<Vec<usize>> = vec![Vec::with_capacity(rows); 6];
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let odor = rng.random_range(0..ODOR.len());
        let spore = rng.random_range(0..SPORE.len());
        // colour and ring loosely follow odor so the columns are not independent
        let color = if rng.random_bool(0.5) { odor % COLOR.len() } else { rng.random_range(0..COLOR.len()) };
        let ring = if odor >= 3 && rng.random_bool(0.6) { 0 } else { rng.random_range(0..RING.len()) };
        let cap = rng.random_range(0..CAP.len());
        let habitat = rng.random_range(0..HABITAT.len());
        let poisonous = odor >= 3 || (odor == 2 && spore == 2);
        for (c, v) in cols.iter_mut().zip([odor, spore, cap, color, ring, habitat]) {
            c.push(v);
        }
        labels.push(usize::from(poisonous));
    }
    let mut b = Builder::new();
    let mut it = cols.into_iter();
    for (name, mods) in [
        ("odor", &ODOR[..]),
        ("spore_color", &SPORE[..]),
        ("cap_shape", &CAP[..]),
        ("cap_color", &COLOR[..]),
        ("ring_number", &RING[..]),
        ("habitat", &HABITAT[..]),
    ] {
        b.categorical(name, mods, it.next().expect("six columns"));
    }
    b.finish(&["edible", "poisonous"], labels)
}

pub fn manifold(rows: usize, seed: u64) -> RawTable {
    const REGION: [&str; 4] = ["north", "east", "south", "west"];
    const GRADE: [&str; 3] = ["low", "mid", "high"];
    let mut rng = seed::rng(seed);
    let mut num = vec![Vec::with_capacity(rows); 6];
    let mut region = Vec::with_capacity(rows);
    let mut grade = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let u: f64 = rng.random_range(0.0..1.0);
        let v: f64 = rng.random_range(0.0..1.0);
        let t = 3.0 * u;
        let views = [
            t * t.cos(),
            t * t.sin(),
            4.0 * v,
            (2.0 * v - 1.0) * u,
            (u + v).exp(),
            gauss(&mut rng),
        ];
        for (c, val) in num.iter_mut().zip(views) {
            c.push(val + 0.05 * gauss(&mut rng));
        }
        let quadrant = usize::from(u > 0.5) * 2 + usize::from(v > 0.5);
        region.push(if rng.random_bool(0.85) { quadrant } else { rng.random_range(0..4) });
        grade.push(((u + v) * 1.5).floor().min(2.0) as usize);
        let boundary = 0.5 + 0.25 * (2.0 * std::f64::consts::PI * u).sin();
        labels.push(usize::from(v + 0.12 * gauss(&mut rng) > boundary));
    }
    let mut b = Builder::new();
    for (k, c) in num.into_iter().enumerate() {
        b.numeric(&format!("s{k}"), c);
    }
    b.categorical("region", &REGION, region);
    b.categorical("grade", &GRADE, grade);
    b.finish(&["neg", "pos"], labels)
}

/// Eight smooth views of latents `(u, v)`; class 1 when `v` lies above
/// `0.5 + 0.2 sin(2 pi u)`, with a little label noise.
pub fn helix(rows: usize, seed: u64) -> RawTable {
    use std::f64::consts::PI;
    let mut rng = seed::rng(seed);
    let mut num = vec![Vec::with_capacity(rows); 8];
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let u: f64 = rng.random_range(0.0..1.0);
        let v: f64 = rng.random_range(0.0..1.0);
        let views = [
            (3.0 * PI * u).cos(),
            (3.0 * PI * u).sin(),
            u * (2.0 * PI * v).cos(),
            u * (2.0 * PI * v).sin(),
            v + 0.3 * (4.0 * PI * u).sin(),
            (2.0 * PI * (u + v)).cos(),
            (u - 0.5).powi(2),
            (5.0 * v).sin(),
        ];
        for (c, val) in num.iter_mut().zip(views) {
            c.push(val + 0.03 * gauss(&mut rng));
        }
        let boundary = 0.5 + 0.2 * (2.0 * PI * u).sin();
        labels.push(usize::from(v + 0.08 * gauss(&mut rng) > boundary));
    }
    let mut b = Builder::new();
    for (k, c) in num.into_iter().enumerate() {
        b.numeric(&format!("h{k}"), c);
    }
    b.finish(&["neg", "pos"], labels)
}

/// Writes `table` as CSV with a header in schema column order.
pub fn write_table_csv(table: &RawTable, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let names: Vec<&str> = table.schema.columns.iter().map(|c| c.name.as_str()).collect();
    writeln!(out, "{}", names.join(","))?;
    for r in 0..table.rows {
        let cells: Vec<String> = table
            .schema
            .columns
            .iter()
            .zip(&table.columns)
            .map(|(spec, col)| match col {
                RawColumn::Numeric(v) => format!("{}", v[r]),
                RawColumn::Categorical(v) => {
                    debug_assert!(spec.kind != ColumnKind::Numeric);
                    spec.modalities.as_ref().expect("resolved")[v[r]].clone()
                }
            })
            .collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}
