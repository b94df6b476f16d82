//! Cell encoding for the 4-node, 6-edge search space.
//!
//! A [`Genotype`] assigns one [`Operation`] to each edge of the cell DAG. Edges are
//! ordered `(1←0), (2←0), (2←1), (3←0), (3←1), (3←2)`, which is also the order in
//! which they appear in the canonical architecture string
//! `|op~0|+|op~0|op~1|+|op~0|op~1|op~2|`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of edges (genes) in a cell.
pub const NUM_EDGES: usize = 6;

/// Number of nodes in a cell, including the input node.
pub const NUM_NODES: usize = 4;

/// Number of distinct genotypes, `5^6`.
pub const SPACE_SIZE: usize = 15_625;

/// `(to, from)` node pairs, in gene order.
pub const EDGES: [(usize, usize); NUM_EDGES] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    None = 0,
    SkipConnect = 1,
    NorConv1x1 = 2,
    NorConv3x3 = 3,
    AvgPool3x3 = 4,
}

impl Operation {
    pub const ALL: [Operation; 5] = [
        Operation::None,
        Operation::SkipConnect,
        Operation::NorConv1x1,
        Operation::NorConv3x3,
        Operation::AvgPool3x3,
    ];

    pub const COUNT: usize = 5;

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    /// Canonical benchmark name.
    pub fn name(self) -> &'static str {
        match self {
            Operation::None => "none",
            Operation::SkipConnect => "skip_connect",
            Operation::NorConv1x1 => "nor_conv_1x1",
            Operation::NorConv3x3 => "nor_conv_3x3",
            Operation::AvgPool3x3 => "avg_pool_3x3",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.name() == name)
    }

    pub fn is_conv(self) -> bool {
        matches!(self, Operation::NorConv1x1 | Operation::NorConv3x3)
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One architecture of the cell search space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genotype {
    genes: [Operation; NUM_EDGES],
}

impl Genotype {
    pub const fn new(genes: [Operation; NUM_EDGES]) -> Self {
        Self { genes }
    }

    pub fn from_codes(codes: [u8; NUM_EDGES]) -> Result<Self> {
        let mut genes = [Operation::None; NUM_EDGES];
        for (slot, &code) in genes.iter_mut().zip(codes.iter()) {
            *slot = Operation::from_code(code)
                .ok_or_else(|| Error::Argument(format!("operation code {code} out of range")))?;
        }
        Ok(Self { genes })
    }

    pub fn uniform(op: Operation) -> Self {
        Self { genes: [op; NUM_EDGES] }
    }

    pub fn genes(&self) -> &[Operation; NUM_EDGES] {
        &self.genes
    }

    pub fn codes(&self) -> [u8; NUM_EDGES] {
        self.genes.map(Operation::code)
    }

    pub fn gene(&self, edge: usize) -> Operation {
        self.genes[edge]
    }

    pub fn with_gene(mut self, edge: usize, op: Operation) -> Self {
        self.genes[edge] = op;
        self
    }

    /// Position in lexicographic gene order, `0..SPACE_SIZE`.
    pub fn index(&self) -> usize {
        self.genes
            .iter()
            .fold(0, |acc, op| acc * Operation::COUNT + op.code() as usize)
    }

    pub fn from_index(mut index: usize) -> Option<Self> {
        if index >= SPACE_SIZE {
            return None;
        }
        let mut genes = [Operation::None; NUM_EDGES];
        for slot in genes.iter_mut().rev() {
            *slot = Operation::ALL[index % Operation::COUNT];
            index /= Operation::COUNT;
        }
        Some(Self { genes })
    }

    pub fn count(&self, op: Operation) -> usize {
        self.genes.iter().filter(|&&g| g == op).count()
    }

    pub fn hamming(&self, other: &Genotype) -> usize {
        self.genes
            .iter()
            .zip(other.genes.iter())
            .filter(|(a, b)| a != b)
            .count()
    }

    pub fn to_arch_str(&self) -> String {
        format_arch_str(self)
    }
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_arch_str(self))
    }
}

impl FromStr for Genotype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_arch_str(s)
    }
}

impl Serialize for Genotype {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_arch_str(self))
    }
}

impl<'de> Deserialize<'de> for Genotype {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_arch_str(&s).map_err(serde::de::Error::custom)
    }
}

/// Emits the canonical architecture string.
pub fn format_arch_str(g: &Genotype) -> String {
    let mut out = String::with_capacity(96);
    let mut edge = 0;
    for node in 1..NUM_NODES {
        if node > 1 {
            out.push('+');
        }
        out.push('|');
        for input in 0..node {
            out.push_str(g.genes[edge].name());
            out.push('~');
            out.push(char::from(b'0' + input as u8));
            out.push('|');
            edge += 1;
        }
    }
    out
}

fn parse_error(position: usize, token: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        position,
        token: token.to_string(),
        reason: reason.into(),
    }
}

/// Parses the canonical architecture string.
///
/// Errors name the offending token and its byte offset within `s`.
pub fn parse_arch_str(s: &str) -> Result<Genotype> {
    let mut genes = [Operation::None; NUM_EDGES];
    let mut edge = 0;
    let mut offset = 0;
    let groups: Vec<&str> = s.split('+').collect();
    if groups.len() != NUM_NODES - 1 {
        return Err(parse_error(
            0,
            s,
            format!(
                "expected {} node groups separated by `+`, found {}",
                NUM_NODES - 1,
                groups.len()
            ),
        ));
    }
    for (group_idx, group) in groups.iter().enumerate() {
        let node = group_idx + 1;
        if group.len() < 2 || !group.starts_with('|') || !group.ends_with('|') {
            return Err(parse_error(offset, group, "node group must be delimited by `|`"));
        }
        let inner = &group[1..group.len() - 1];
        let tokens: Vec<&str> = inner.split('|').collect();
        if tokens.len() != node {
            return Err(parse_error(
                offset,
                group,
                format!("node {node} needs {node} input edges, found {}", tokens.len()),
            ));
        }
        let mut tok_offset = offset + 1;
        for (input, tok) in tokens.iter().enumerate() {
            let (name, idx) = tok
                .split_once('~')
                .ok_or_else(|| parse_error(tok_offset, tok, "expected `op~k`"))?;
            let op = Operation::from_name(name)
                .ok_or_else(|| parse_error(tok_offset, tok, format!("unknown operation `{name}`")))?;
            if idx != input.to_string() {
                return Err(parse_error(
                    tok_offset,
                    tok,
                    format!("expected input index {input}, found `{idx}`"),
                ));
            }
            genes[edge] = op;
            edge += 1;
            tok_offset += tok.len() + 1;
        }
        offset += group.len() + 1;
    }
    Ok(Genotype { genes })
}

pub fn random_genotype<R: Rng + ?Sized>(rng: &mut R) -> Genotype {
    let mut genes = [Operation::None; NUM_EDGES];
    for slot in genes.iter_mut() {
        *slot = Operation::ALL[rng.random_range(0..Operation::COUNT)];
    }
    Genotype { genes }
}

/// Uniform crossover: every child gene is taken from either parent with probability ½.
pub fn crossover<R: Rng + ?Sized>(a: &Genotype, b: &Genotype, rng: &mut R) -> Genotype {
    let mut genes = a.genes;
    for (slot, &other) in genes.iter_mut().zip(b.genes.iter()) {
        if rng.random_bool(0.5) {
            *slot = other;
        }
    }
    Genotype { genes }
}

/// Resamples each gene with probability `rate` to a uniformly chosen different operation.
pub fn mutate<R: Rng + ?Sized>(g: &Genotype, rate: f64, rng: &mut R) -> Result<Genotype> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Argument(format!("mutation rate {rate} outside [0, 1]")));
    }
    let mut genes = g.genes;
    for slot in genes.iter_mut() {
        if rate > 0.0 && rng.random_bool(rate) {
            let r = rng.random_range(0..Operation::COUNT - 1) as u8;
            let code = if r < slot.code() { r } else { r + 1 };
            *slot = Operation::ALL[code as usize];
        }
    }
    Ok(Genotype { genes })
}

/// All genotypes in lexicographic gene order.
pub fn enumerate_space() -> impl ExactSizeIterator<Item = Genotype> + Clone {
    (0..SPACE_SIZE).map(|i| Genotype::from_index(i).expect("index in range"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn all_none_parses() {
        let g = parse_arch_str("|none~0|+|none~0|none~1|+|none~0|none~1|none~2|").unwrap();
        assert_eq!(g.codes(), [0; 6]);
    }

    #[test]
    fn single_substitution_parses() {
        let g = parse_arch_str("|nor_conv_3x3~0|+|none~0|none~1|+|none~0|none~1|none~2|").unwrap();
        assert_eq!(g.codes(), [3, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn formats_positionally() {
        let g = Genotype::from_codes([0; 6]).unwrap();
        assert_eq!(format_arch_str(&g), "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|");
        let g = Genotype::from_codes([3, 1, 2, 0, 4, 1]).unwrap();
        assert_eq!(
            format_arch_str(&g),
            "|nor_conv_3x3~0|+|skip_connect~0|nor_conv_1x1~1|+|none~0|avg_pool_3x3~1|skip_connect~2|"
        );
    }

    #[test]
    fn operation_names_round_trip() {
        for op in Operation::ALL {
            assert_eq!(Operation::from_name(op.name()), Some(op));
            assert_eq!(Operation::from_code(op.code()), Some(op));
        }
        assert_eq!(Operation::from_code(5), None);
    }

    #[test]
    fn exhaustive_round_trip() {
        for g in enumerate_space() {
            let s = format_arch_str(&g);
            let back = parse_arch_str(&s).unwrap();
            assert_eq!(back, g);
            assert_eq!(format_arch_str(&back), s);
        }
    }

    #[test]
    fn parse_errors_name_the_token() {
        let cases = [
            ("|none~0|+|none~0|none~1|", "node groups"),
            ("|none~0|+|none~0|none~1|+|none~0|none~1|conv~2|", "unknown operation"),
            ("|none~0|+|none~0|none~2|+|none~0|none~1|none~2|", "input index 1"),
            ("|none~0|+|none~0|none~1|+|none~0|none~1|", "3 input edges"),
            ("none~0|+|none~0|none~1|+|none~0|none~1|none~2|", "delimited"),
            ("|none0|+|none~0|none~1|+|none~0|none~1|none~2|", "op~k"),
            ("", "node groups"),
        ];
        for (input, needle) in cases {
            let err = parse_arch_str(input).unwrap_err();
            let msg = err.to_string();
            assert!(msg.contains(needle), "{input}: {msg}");
        }
        match parse_arch_str("|none~0|+|none~0|none~1|+|none~0|bogus~1|none~2|") {
            Err(Error::Parse { position, token, .. }) => {
                assert_eq!(token, "bogus~1");
                assert_eq!(position, 33);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn enumeration_endpoints_and_uniqueness() {
        let all: Vec<_> = enumerate_space().collect();
        assert_eq!(all.len(), SPACE_SIZE);
        assert_eq!(all[0].codes(), [0; 6]);
        assert_eq!(all[SPACE_SIZE - 1].codes(), [4; 6]);
        let set: HashSet<_> = all.iter().collect();
        assert_eq!(set.len(), SPACE_SIZE);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        for (i, g) in all.iter().enumerate() {
            assert_eq!(g.index(), i);
        }
    }

    #[test]
    fn random_is_deterministic() {
        let a = random_genotype(&mut ChaCha8Rng::seed_from_u64(17));
        let b = random_genotype(&mut ChaCha8Rng::seed_from_u64(17));
        assert_eq!(a, b);
    }

    #[test]
    fn random_marginals_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 100_000;
        let mut counts = [[0usize; 5]; 6];
        for _ in 0..draws {
            let g = random_genotype(&mut rng);
            for (pos, op) in g.genes().iter().enumerate() {
                counts[pos][op.code() as usize] += 1;
            }
        }
        for row in counts {
            for c in row {
                let f = c as f64 / draws as f64;
                assert!((f - 0.2).abs() <= 0.01, "frequency {f}");
            }
        }
    }

    #[test]
    fn random_covers_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen = vec![false; SPACE_SIZE];
        let mut missing = SPACE_SIZE;
        for _ in 0..1_000_000 {
            let i = random_genotype(&mut rng).index();
            if !seen[i] {
                seen[i] = true;
                missing -= 1;
            }
        }
        assert_eq!(missing, 0);
    }

    #[test]
    fn crossover_of_clones_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let g = random_genotype(&mut rng);
            assert_eq!(crossover(&g, &g, &mut rng), g);
        }
    }

    #[test]
    fn crossover_takes_parent_genes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let a = random_genotype(&mut rng);
            let b = random_genotype(&mut rng);
            let c = crossover(&a, &b, &mut rng);
            for i in 0..NUM_EDGES {
                assert!(c.gene(i) == a.gene(i) || c.gene(i) == b.gene(i));
            }
        }
    }

    #[test]
    fn crossover_marginals_are_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Genotype::uniform(Operation::None);
        let b = Genotype::uniform(Operation::AvgPool3x3);
        let trials = 10_000;
        let mut from_b = [0usize; NUM_EDGES];
        for _ in 0..trials {
            let c = crossover(&a, &b, &mut rng);
            for i in 0..NUM_EDGES {
                if c.gene(i) == Operation::AvgPool3x3 {
                    from_b[i] += 1;
                }
            }
        }
        for n in from_b {
            let f = n as f64 / trials as f64;
            assert!((f - 0.5).abs() <= 0.02, "frequency {f}");
        }
    }

    #[test]
    fn mutation_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1_000 {
            let g = random_genotype(&mut rng);
            assert_eq!(mutate(&g, 0.0, &mut rng).unwrap(), g);
            let m = mutate(&g, 1.0, &mut rng).unwrap();
            assert_eq!(m.hamming(&g), NUM_EDGES);
        }
    }

    #[test]
    fn mutation_hamming_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 10_000;
        let mut total = 0;
        for _ in 0..trials {
            let g = random_genotype(&mut rng);
            total += mutate(&g, 1.0 / 6.0, &mut rng).unwrap().hamming(&g);
        }
        let mean = total as f64 / trials as f64;
        assert!((mean - 1.0).abs() <= 0.05, "mean hamming {mean}");
    }

    #[test]
    fn mutation_rejects_bad_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = Genotype::uniform(Operation::None);
        assert!(matches!(mutate(&g, -0.1, &mut rng), Err(Error::Argument(_))));
        assert!(matches!(mutate(&g, 1.5, &mut rng), Err(Error::Argument(_))));
        assert!(mutate(&g, f64::NAN, &mut rng).is_err());
    }
}
