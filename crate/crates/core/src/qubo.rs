//! QUBO assembly by affine substitution, energy evaluation and the
//! `HOTQUBO v1` text format.
//!
//! The QUBO minimizes `−f(x)` with `x = offset + W·b`. Its matrix is kept
//! upper-triangular: `Q[i][j]` for `i < j` holds the full coefficient of
//! `bᵢ·bⱼ` (not half of it) and the diagonal holds the linear terms, so
//! `energy(b) = Σ_{i≤j} Q[i][j]·bᵢ·bⱼ + offset`.
//!
//! Text layout (UTF-8, `\n`-terminated lines):
//!
//! ```text
//! HOTQUBO v1
//! bits <total_bits> offset <value>
//! var <label> offset <lower> weights <w1,w2,...>     (one per asset)
//! <i> <j> <value>                                    (nonzero entries, i <= j, sorted)
//! ```
//!
//! Reals are written in scientific notation with 17 significant digits.

use std::fmt::Write as _;
use std::io::{self, Read, Write};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::encode::{EncodeError, Encoding};
use crate::model::QuadraticModel;
use crate::numerics::{self, NumericsError, Vector};
use crate::scalar::Real;

pub const FORMAT_TAG: &str = "HOTQUBO";
pub const FORMAT_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum QuboError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("bit vector has length {found}, instance has {expected} bits")]
    LengthMismatch { expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported format version {0:?}")]
    VersionMismatch(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, QuboError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstructionMode {
    HotStart,
    Baseline,
}

impl ConstructionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::HotStart => "hotstart",
            Self::Baseline => "baseline",
        }
    }
}

/// Where an instance came from. Imported instances carry neither field.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub model_hash: Option<String>,
    pub mode: Option<ConstructionMode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboInstance<T> {
    bits: usize,
    /// Packed upper triangle, row-major.
    upper: Vec<T>,
    offset: T,
    encoding: Encoding,
    pub meta: Provenance,
}

#[inline]
fn packed_upper(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - i * (i + 1) / 2 + j
}

impl<T: Real> QuboInstance<T> {
    fn zeros(encoding: Encoding, offset: T) -> Self {
        let n = encoding.total_bits();
        Self { bits: n, upper: vec![T::zero(); n * (n + 1) / 2], offset, encoding, meta: Provenance::default() }
    }

    /// Instance from explicit upper-triangular entries (`i ≤ j`); repeated
    /// positions accumulate.
    pub fn from_entries(encoding: Encoding, offset: T, entries: &[(usize, usize, T)]) -> Result<Self> {
        let mut q = Self::zeros(encoding, offset);
        for &(i, j, v) in entries {
            if i > j || j >= q.bits {
                return Err(QuboError::LengthMismatch { expected: q.bits, found: j + 1 });
            }
            q.add(i, j, v);
        }
        Ok(q)
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn encoding(&self) -> &Encoding {
        &self.encoding
    }

    /// Coefficient of `bᵢ·bⱼ` (order-insensitive).
    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.upper[packed_upper(self.bits, i, j)]
    }

    fn add(&mut self, i: usize, j: usize, v: T) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let k = packed_upper(self.bits, i, j);
        self.upper[k] = self.upper[k] + v;
    }

    pub fn with_mode(mut self, mode: ConstructionMode) -> Self {
        self.meta.mode = Some(mode);
        self
    }

    /// Largest absolute coefficient (0 for an empty instance).
    pub fn max_abs_coefficient(&self) -> T {
        self.upper.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Nonzero `(i, j, value)` entries with `i ≤ j`, in lexicographic order.
    pub fn entries(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::new();
        for i in 0..self.bits {
            for j in i..self.bits {
                let v = self.get(i, j);
                if v != T::zero() {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// Dense symmetric coupling matrix (row-major, `n × n`) with the full
    /// pair coefficient mirrored on both sides and the linear terms on the
    /// diagonal. Solvers use it for O(n) flip deltas.
    pub fn dense_couplings(&self) -> Vec<T> {
        let n = self.bits;
        let mut d = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.get(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        d
    }

    pub fn energy(&self, bits: &[bool]) -> Result<T> {
        if bits.len() != self.bits {
            return Err(QuboError::LengthMismatch { expected: self.bits, found: bits.len() });
        }
        let set: Vec<usize> = (0..self.bits).filter(|&i| bits[i]).collect();
        let mut e = self.offset;
        for (a, &i) in set.iter().enumerate() {
            for &j in &set[a..] {
                e = e + self.upper[packed_upper(self.bits, i, j)];
            }
        }
        Ok(e)
    }

    pub fn export<W: Write>(&self, mut sink: W) -> io::Result<()> {
        sink.write_all(self.to_text().as_bytes())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{FORMAT_TAG} {FORMAT_VERSION}");
        let _ = writeln!(s, "bits {} offset {}", self.bits, fmt_real(self.offset.as_f64()));
        let e = &self.encoding;
        for i in 0..e.assets() {
            let w: Vec<String> = e.weights()[i].iter().map(u64::to_string).collect();
            let _ = write!(s, "var {} offset {} weights", e.labels()[i], e.offsets()[i]);
            if !w.is_empty() {
                let _ = write!(s, " {}", w.join(","));
            }
            s.push('\n');
        }
        for (i, j, v) in self.entries() {
            let _ = writeln!(s, "{i} {j} {}", fmt_real(v.as_f64()));
        }
        s
    }

    pub fn import<R: Read>(mut source: R) -> Result<Self> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line: usize, message: &str| QuboError::Parse { line, message: message.to_owned() };
        if !text.is_empty() && !text.ends_with('\n') {
            let last = text.lines().count();
            return Err(perr(last, "file does not end with a newline (truncated?)"));
        }
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l)).peekable();

        let (ln, first) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
        let mut head = first.split_whitespace();
        if head.next() != Some(FORMAT_TAG) {
            return Err(perr(ln, "missing HOTQUBO tag"));
        }
        match head.next() {
            Some(FORMAT_VERSION) if head.next().is_none() => {}
            Some(v) => return Err(QuboError::VersionMismatch(v.to_owned())),
            None => return Err(perr(ln, "missing version")),
        }

        let (ln, second) = lines.next().ok_or_else(|| perr(2, "missing bits/offset line"))?;
        let tok: Vec<&str> = second.split_whitespace().collect();
        if tok.len() != 4 || tok[0] != "bits" || tok[2] != "offset" {
            return Err(perr(ln, "expected `bits <n> offset <value>`"));
        }
        let bits: usize = tok[1].parse().map_err(|_| perr(ln, "bad bit count"))?;
        let offset = parse_real(tok[3]).ok_or_else(|| perr(ln, "bad offset value"))?;

        let mut labels = Vec::new();
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        while let Some(&(ln, line)) = lines.peek() {
            if !line.starts_with("var ") {
                break;
            }
            lines.next();
            let tok: Vec<&str> = line.split_whitespace().collect();
            if !(tok.len() == 5 || tok.len() == 6) || tok[2] != "offset" || tok[4] != "weights" {
                return Err(perr(ln, "expected `var <label> offset <L> weights <w,...>`"));
            }
            labels.push(tok[1].to_owned());
            offsets.push(tok[3].parse::<i64>().map_err(|_| perr(ln, "bad variable offset"))?);
            let w = match tok.get(5) {
                None => Vec::new(),
                Some(list) => list
                    .split(',')
                    .map(|v| v.parse::<u64>())
                    .collect::<std::result::Result<Vec<u64>, _>>()
                    .map_err(|_| perr(ln, "bad weight list"))?,
            };
            weights.push(w);
        }
        let encoding = Encoding::new(labels, offsets, weights)?;
        if encoding.total_bits() != bits {
            return Err(perr(ln, "variable weights do not account for the declared bit count"));
        }

        let mut q = Self::zeros(encoding, T::lit(offset));
        let mut prev: Option<(usize, usize)> = None;
        for (ln, line) in lines {
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() != 3 {
                return Err(perr(ln, "expected `<i> <j> <value>`"));
            }
            let i: usize = tok[0].parse().map_err(|_| perr(ln, "bad row index"))?;
            let j: usize = tok[1].parse().map_err(|_| perr(ln, "bad column index"))?;
            let v = parse_real(tok[2]).ok_or_else(|| perr(ln, "bad coefficient"))?;
            if i > j || j >= bits {
                return Err(perr(ln, "entry outside the upper triangle"));
            }
            if prev.is_some_and(|p| p >= (i, j)) {
                return Err(perr(ln, "entries not strictly sorted by (i, j)"));
            }
            prev = Some((i, j));
            q.add(i, j, T::lit(v));
        }
        Ok(q)
    }
}

/// `−f(L + W·b)` expanded around the lower corner `L`: with `g = B·L − a`,
/// diagonal `½·Bᵢᵢ·w² + gᵢ·w`, pair `(p, q)` gets `B_{i(p) i(q)}·w_p·w_q`,
/// and the offset is `−f(L)`.
pub fn build_qubo<T: Real>(m: &QuadraticModel<T>, e: &Encoding) -> Result<QuboInstance<T>> {
    numerics::check_dim(m.dim(), e.assets())?;
    let lower: Vec<T> = e.offsets().iter().map(|&v| T::lit(v as f64)).collect();
    let offset = -m.evaluate(&lower)?;
    let grad = m.gradient(&Vector::new(lower)?)?;
    let layout: Vec<(usize, T)> = e.bit_layout().into_iter().map(|(a, w)| (a, T::lit(w as f64))).collect();
    let b = m.quadratic();
    let half = T::lit(0.5);

    let mut q = QuboInstance::zeros(e.clone(), offset);
    for (p, &(ip, wp)) in layout.iter().enumerate() {
        q.add(p, p, half * b.get(ip, ip) * wp * wp - grad[ip] * wp);
        for (r, &(ir, wr)) in layout.iter().enumerate().skip(p + 1) {
            q.add(p, r, b.get(ip, ir) * wp * wr);
        }
    }
    q.meta.model_hash = Some(model_hash(m));
    Ok(q)
}

/// First 16 hex digits of SHA-256 over the model's coefficients.
pub fn model_hash<T: Real>(m: &QuadraticModel<T>) -> String {
    let mut h = Sha256::new();
    h.update((m.dim() as u64).to_le_bytes());
    for &v in m.linear().iter() {
        h.update(v.as_f64().to_le_bytes());
    }
    for i in 0..m.dim() {
        for j in 0..=i {
            h.update(m.quadratic().get(i, j).as_f64().to_le_bytes());
        }
    }
    h.update(m.constant().as_f64().to_le_bytes());
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn energy<T: Real>(qi: &QuboInstance<T>, bits: &[bool]) -> Result<T> {
    qi.energy(bits)
}

pub fn export<T: Real, W: Write>(qi: &QuboInstance<T>, sink: W) -> io::Result<()> {
    qi.export(sink)
}

pub fn import<T: Real, R: Read>(source: R) -> Result<QuboInstance<T>> {
    QuboInstance::import(source)
}

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Accepts only the exact shape `fmt_real` writes (16 fraction digits and
/// an exponent), so a line cut short never parses as a different number.
fn parse_real(s: &str) -> Option<f64> {
    let (mantissa, exp) = s.split_once('e')?;
    let digits = mantissa.strip_prefix('-').unwrap_or(mantissa);
    let (int, frac) = digits.split_once('.')?;
    let exp_digits = exp.strip_prefix('-').unwrap_or(exp);
    let well_formed = int.len() == 1
        && int.bytes().all(|c| c.is_ascii_digit())
        && frac.len() == 16
        && frac.bytes().all(|c| c.is_ascii_digit())
        && !exp_digits.is_empty()
        && exp_digits.bytes().all(|c| c.is_ascii_digit());
    if !well_formed {
        return None;
    }
    s.parse().ok().filter(|v: &f64| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::{bounded_weights, decode};
    use crate::numerics::SymMatrix;
    use proptest::prelude::*;

    fn one_bit() -> (QuadraticModel<f64>, Encoding) {
        let m = QuadraticModel::new(Vector::from_f64(&[1.0]).unwrap(), SymMatrix::from_diagonal(&[2.0]), 0.0)
            .unwrap();
        let e = Encoding::new(vec!["a".into()], vec![0], vec![vec![1]]).unwrap();
        (m, e)
    }

    fn toy() -> (QuadraticModel<f64>, Encoding) {
        let m = QuadraticModel::new(
            Vector::from_f64(&[3.1, -1.7]).unwrap(),
            SymMatrix::from_f64_rows(&[&[1.5, 0.4], &[0.4, 0.9]]).unwrap(),
            0.25,
        )
        .unwrap();
        let e = Encoding::new(vec!["A".into(), "B".into()], vec![1, -3], vec![vec![1, 1], vec![1]]).unwrap();
        (m, e)
    }

    fn all_bits(n: usize) -> impl Iterator<Item = Vec<bool>> {
        (0..1u64 << n).map(move |m| (0..n).map(|j| m >> j & 1 == 1).collect())
    }

    #[test]
    fn packed_upper_is_dense_and_ordered() {
        for n in 1..8 {
            let mut k = 0;
            for i in 0..n {
                for j in i..n {
                    assert_eq!(packed_upper(n, i, j), k);
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn one_bit_instance() {
        let (m, e) = one_bit();
        let q = build_qubo(&m, &e).unwrap();
        assert_eq!(q.get(0, 0), 0.0);
        assert_eq!(q.offset(), 0.0);
        assert_eq!(q.energy(&[false]).unwrap(), 0.0);
        assert_eq!(q.energy(&[true]).unwrap(), 0.0);
    }

    #[test]
    fn zero_bit_instance() {
        let (m, _) = toy();
        let e = Encoding::new(vec!["A".into(), "B".into()], vec![2, 5], vec![vec![], vec![]]).unwrap();
        let q = build_qubo(&m, &e).unwrap();
        assert_eq!(q.bits(), 0);
        assert_eq!(q.offset(), -m.evaluate_int(&[2, 5]).unwrap());
        assert_eq!(q.energy(&[]).unwrap(), q.offset());
        assert_eq!(q.to_text(), format!(
            "HOTQUBO v1\nbits 0 offset {}\nvar A offset 2 weights\nvar B offset 5 weights\n",
            fmt_real(q.offset())
        ));
    }

    #[test]
    fn toy_energy_table() {
        let (m, e) = toy();
        let q = build_qubo(&m, &e).unwrap();
        assert_eq!(q.bits(), 3);
        for b in all_bits(3) {
            let want = -m.evaluate_int(&decode(&e, &b).unwrap()).unwrap();
            let got = q.energy(&b).unwrap();
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{b:?}: {got} vs {want}");
        }
        assert!(matches!(q.energy(&[true]), Err(QuboError::LengthMismatch { expected: 3, found: 1 })));
        assert_eq!(q.energy(&[false; 3]).unwrap(), q.offset());
        assert_eq!(q.energy(&[false, true, false]).unwrap(), q.get(1, 1) + q.offset());
    }

    #[test]
    fn dimension_mismatch() {
        let (m, _) = toy();
        let e = Encoding::new(vec!["a".into()], vec![0], vec![vec![1]]).unwrap();
        assert!(matches!(build_qubo(&m, &e), Err(QuboError::Numerics(_))));
    }

    #[test]
    fn one_bit_golden_text() {
        let m = QuadraticModel::new(Vector::from_f64(&[2.0]).unwrap(), SymMatrix::from_diagonal(&[1.0]), 0.0)
            .unwrap();
        let e = Encoding::new(vec!["AAPL".into()], vec![3], vec![vec![1]]).unwrap();
        let q = build_qubo(&m, &e).unwrap();
        // f(3) = 6 − 4.5 = 1.5, f(4) = 8 − 8 = 0 → offset −1.5, Q = 1.5
        assert_eq!(
            q.to_text(),
            "HOTQUBO v1\n\
             bits 1 offset -1.5000000000000000e0\n\
             var AAPL offset 3 weights 1\n\
             0 0 1.5000000000000000e0\n"
        );
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let (m, e) = toy();
        let q = build_qubo(&m, &e).unwrap().with_mode(ConstructionMode::HotStart);
        let mut buf = Vec::new();
        q.export(&mut buf).unwrap();
        let back: QuboInstance<f64> = import(buf.as_slice()).unwrap();
        let mut again = Vec::new();
        export(&back, &mut again).unwrap();
        assert_eq!(buf, again);
        assert_eq!(back.encoding(), q.encoding());
        assert_eq!(back.offset(), q.offset());
        assert_eq!(back.meta, Provenance::default());
        for b in all_bits(3) {
            assert_eq!(back.energy(&b).unwrap(), q.energy(&b).unwrap());
        }
    }

    #[test]
    fn import_errors() {
        let (m, e) = toy();
        let text = build_qubo(&m, &e).unwrap().to_text();
        // every proper prefix either fails or ends on a line boundary
        for cut in 0..text.len() {
            let prefix = &text[..cut];
            let r = QuboInstance::<f64>::from_text(prefix);
            if !prefix.ends_with('\n') {
                assert!(matches!(r, Err(QuboError::Parse { .. })), "cut {cut} parsed: {prefix:?}");
            }
        }
        let v2 = text.replacen("HOTQUBO v1", "HOTQUBO v2", 1);
        assert!(matches!(QuboInstance::<f64>::from_text(&v2), Err(QuboError::VersionMismatch(v)) if v == "v2"));
        let unsorted = "HOTQUBO v1\nbits 2 offset 0.0000000000000000e0\nvar a offset 0 weights 1,1\n\
                        0 1 1.0000000000000000e0\n0 0 1.0000000000000000e0\n";
        assert!(matches!(
            QuboInstance::<f64>::from_text(unsorted),
            Err(QuboError::Parse { line: 5, .. })
        ));
        let short = "HOTQUBO v1\nbits 3 offset 0.0000000000000000e0\nvar a offset 0 weights 1,1\n";
        assert!(matches!(QuboInstance::<f64>::from_text(short), Err(QuboError::Parse { .. })));
    }

    #[test]
    fn constant_shift_only_moves_offset() {
        let (m, e) = toy();
        let q0 = build_qubo(&m, &e).unwrap();
        let q1 = build_qubo(&m.with_constant(1234.5), &e).unwrap();
        assert_eq!(q0.upper.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   q1.upper.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_ne!(q0.offset(), q1.offset());
    }

    #[test]
    fn works_in_f32() {
        let m = QuadraticModel::<f32>::new(
            Vector::from_f64(&[3.1, -1.7]).unwrap(),
            SymMatrix::from_f64_rows(&[&[1.5, 0.4], &[0.4, 0.9]]).unwrap(),
            0.0,
        )
        .unwrap();
        let (_, e) = toy();
        let q = build_qubo(&m, &e).unwrap();
        for b in all_bits(3) {
            let want = -m.evaluate_int(&decode(&e, &b).unwrap()).unwrap();
            assert!((q.energy(&b).unwrap() - want).abs() < 1e-4);
        }
    }

    proptest! {
        #[test]
        fn energy_matches_negated_objective(
            (n, entries, a, offsets, spans, c) in (1usize..=4).prop_flat_map(|n| (
                Just(n),
                prop::collection::vec(-1.0f64..1.0, n * n),
                prop::collection::vec(-10.0f64..10.0, n),
                prop::collection::vec(-20i64..20, n),
                prop::collection::vec(0u64..6, n),
                -100.0f64..100.0,
            ))
        ) {
            let mut b = SymMatrix::zeros(n);
            for i in 0..n {
                for j in 0..=i {
                    let s: f64 = (0..n).map(|k| entries[k * n + i] * entries[k * n + j]).sum();
                    b.set(i, j, s + if i == j { 0.1 } else { 0.0 });
                }
            }
            let m = QuadraticModel::new(Vector::new(a).unwrap(), b, c).unwrap();
            let labels = (0..n).map(|i| format!("t{i}")).collect();
            let e = Encoding::new(labels, offsets, spans.iter().map(|&s| bounded_weights(s)).collect()).unwrap();
            prop_assume!(e.total_bits() <= 12);
            let q = build_qubo(&m, &e).unwrap();
            for bits in all_bits(e.total_bits()) {
                let want = -m.evaluate_int(&decode(&e, &bits).unwrap()).unwrap();
                let got = q.energy(&bits).unwrap();
                prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));
            }
            let back: QuboInstance<f64> = import(q.to_text().as_bytes()).unwrap();
            prop_assert_eq!(back.to_text(), q.to_text());
        }
    }
}
