//! Full factorials, regular two-level fractions and their alias algebra.
//!
//! Factor letters follow declaration order (`A` is the first factor). A word
//! is a product of coded ±1 columns with a fixed sign; multiplying words is a
//! symmetric difference on letters and a product of signs.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Design, Factor, Provenance, Role, Term};

/// Letters are limited to `A`..=`Z`.
pub const MAX_LETTERS: usize = 26;

/// Default cap on the order of terms listed in alias reports.
pub const DEFAULT_ALIAS_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word {
    letters: u32,
    negative: bool,
}

impl Word {
    pub const IDENTITY: Word = Word { letters: 0, negative: false };

    pub fn from_factors(factors: impl IntoIterator<Item = usize>, sign: i8) -> Result<Word> {
        let mut letters = 0u32;
        for f in factors {
            if f >= MAX_LETTERS {
                return Err(Error::InvalidWord {
                    word: format!("factor #{f}"),
                    reason: "only 26 letters are available".into(),
                });
            }
            letters ^= 1 << f;
        }
        Ok(Word { letters, negative: sign < 0 })
    }

    pub fn from_term(term: &Term) -> Word {
        Word::from_factors(term.factors().iter().copied(), 1).expect("term within letter range")
    }

    /// Parse `ABCE`, `ABCE=+1`, `BCDF=-1` or `-ABC`.
    pub fn parse(s: &str) -> Result<Word> {
        let invalid = |reason: &str| Error::InvalidWord { word: s.to_string(), reason: reason.to_string() };
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (body, mut negative) = match compact.split_once('=') {
            Some((lhs, rhs)) => {
                let neg = match rhs {
                    "+1" | "1" | "+" => false,
                    "-1" | "-" => true,
                    _ => return Err(invalid("sign must be +1 or -1")),
                };
                (lhs.to_string(), neg)
            }
            None => (compact.clone(), false),
        };
        let body = match body.strip_prefix('-') {
            Some(rest) => {
                negative = !negative;
                rest.to_string()
            }
            None => body.strip_prefix('+').unwrap_or(&body).to_string(),
        };
        if body.is_empty() {
            return Err(invalid("empty word"));
        }
        let mut letters = 0u32;
        for c in body.chars() {
            if !c.is_ascii_uppercase() {
                return Err(invalid("letters must be A-Z"));
            }
            let bit = 1u32 << (c as u8 - b'A');
            if letters & bit != 0 {
                return Err(invalid("repeated letter"));
            }
            letters |= bit;
        }
        Ok(Word { letters, negative })
    }

    pub fn is_identity(&self) -> bool {
        self.letters == 0
    }

    pub fn len(&self) -> usize {
        self.letters.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.letters == 0
    }

    pub fn sign(&self) -> i8 {
        if self.negative {
            -1
        } else {
            1
        }
    }

    pub fn mask(&self) -> u32 {
        self.letters
    }

    pub fn factors(&self) -> Vec<usize> {
        (0..MAX_LETTERS).filter(|&i| self.letters & (1 << i) != 0).collect()
    }

    pub fn multiply(&self, other: &Word) -> Word {
        Word { letters: self.letters ^ other.letters, negative: self.negative ^ other.negative }
    }

    /// The word as a term, `None` for the identity.
    pub fn term(&self) -> Option<Term> {
        Term::new(self.factors()).ok()
    }

    pub fn letters(&self) -> String {
        if self.is_identity() {
            return "I".into();
        }
        self.factors().iter().map(|&i| (b'A' + i as u8) as char).collect()
    }

    /// Label using factor names, e.g. `sigma:model`.
    pub fn label(&self, factors: &[Factor]) -> String {
        match self.term() {
            Some(t) => t.label(factors),
            None => "I".into(),
        }
    }

    /// Coded product of the word's columns for one run, times its sign.
    pub fn evaluate(&self, run: &[usize]) -> i8 {
        let mut s = self.sign();
        for f in self.factors() {
            if run[f] == 0 {
                s = -s;
            }
        }
        s
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negative {
            write!(f, "-")?;
        }
        write!(f, "{}", self.letters())
    }
}

/// Check generators are pairwise independent over GF(2) (no generator lies
/// in the group generated by the others).
fn check_independent(generators: &[Word]) -> Result<()> {
    let mut basis = [0u32; 32];
    for g in generators {
        let mut v = g.letters;
        while v != 0 {
            let top = 31 - v.leading_zeros() as usize;
            if basis[top] == 0 {
                basis[top] = v;
                break;
            }
            v ^= basis[top];
        }
        if v == 0 {
            return Err(Error::DependentGenerators(format!(
                "{} lies in the group generated by the others",
                g.letters()
            )));
        }
    }
    Ok(())
}

/// The group of words implied by a set of generators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefiningRelation {
    n_factors: usize,
    generators: Vec<Word>,
    words: Vec<Word>,
}

impl DefiningRelation {
    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn generators(&self) -> &[Word] {
        &self.generators
    }

    pub fn n_factors(&self) -> usize {
        self.n_factors
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.words.contains(w)
    }

    /// `I = ABCE = BCDF = ADEF`
    pub fn display(&self) -> String {
        self.words.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" = ")
    }
}

/// Close the generators under multiplication. Words are listed in subset
/// enumeration order: `I, g1, g2, g1g2, g3, ...`.
pub fn defining_relation(generators: &[Word], n_factors: usize) -> Result<DefiningRelation> {
    for g in generators {
        if g.is_identity() {
            return Err(Error::DependentGenerators("identity used as a generator".into()));
        }
        if g.factors().iter().any(|&f| f >= n_factors) {
            return Err(Error::InvalidWord {
                word: g.to_string(),
                reason: format!("uses a letter beyond the {n_factors} declared factors"),
            });
        }
    }
    check_independent(generators)?;
    let mut words = vec![Word::IDENTITY];
    for g in generators {
        let extra: Vec<Word> = words.iter().map(|w| w.multiply(g)).collect();
        words.extend(extra);
    }
    Ok(DefiningRelation { n_factors, generators: generators.to_vec(), words })
}

/// Length of the shortest non-identity word.
pub fn resolution(relation: &DefiningRelation) -> Result<usize> {
    relation.words.iter().filter(|w| !w.is_identity()).map(Word::len).min().ok_or(Error::TrivialRelation)
}

/// Roman numeral used in design reports.
pub fn roman(r: usize) -> String {
    const NUMERALS: [&str; 11] = ["", "I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X"];
    NUMERALS.get(r).map_or_else(|| r.to_string(), |s| s.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasEntry {
    pub term: Term,
    /// `term · w` for every non-identity word `w`, ordered by order then
    /// letters. Signs carry the word's sign.
    pub aliases: Vec<Word>,
}

impl AliasEntry {
    /// Aliases whose order does not exceed `cap`.
    pub fn visible(&self, cap: usize) -> impl Iterator<Item = &Word> {
        self.aliases.iter().filter(move |w| w.len() <= cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasStructure {
    pub max_order: usize,
    pub entries: Vec<AliasEntry>,
}

impl AliasStructure {
    pub fn get(&self, term: &Term) -> Option<&AliasEntry> {
        self.entries.iter().find(|e| &e.term == term)
    }

    /// Do `a` and `b` share a contrast column?
    pub fn are_aliased(&self, a: &Term, b: &Term) -> bool {
        let wb = Word::from_term(b);
        self.get(a).is_some_and(|e| e.aliases.iter().any(|w| w.mask() == wb.mask()))
    }
}

pub fn alias_structure(relation: &DefiningRelation, max_order: usize) -> Result<AliasStructure> {
    if max_order == 0 {
        return Err(Error::InvalidOrder(max_order));
    }
    let entries = Term::all_up_to(relation.n_factors, max_order)
        .into_iter()
        .map(|term| {
            let t = Word::from_term(&term);
            let mut aliases: Vec<Word> =
                relation.words.iter().filter(|w| !w.is_identity()).map(|w| t.multiply(w)).collect();
            aliases.sort_by_key(|w| (w.len(), w.factors()));
            AliasEntry { term, aliases }
        })
        .collect();
    Ok(AliasStructure { max_order, entries })
}

/// Every combination of levels, lexicographic in level indices (last factor
/// varies fastest).
pub fn full_factorial(factors: Vec<Factor>) -> Result<Design> {
    if factors.is_empty() {
        return Err(Error::InvalidDesign("a full factorial needs at least one factor".into()));
    }
    let sizes: Vec<usize> = factors.iter().map(Factor::n_levels).collect();
    let total: usize = sizes.iter().product();
    let mut runs = Vec::with_capacity(total);
    let mut cur = vec![0usize; sizes.len()];
    for _ in 0..total {
        runs.push(cur.clone());
        for j in (0..sizes.len()).rev() {
            cur[j] += 1;
            if cur[j] < sizes[j] {
                break;
            }
            cur[j] = 0;
        }
    }
    Design::new(factors, runs, Provenance::FullFactorial)
}

/// The full-factorial runs whose coded product over each generator's letters
/// equals that generator's sign.
pub fn fractional_factorial(factors: Vec<Factor>, generators: &[Word]) -> Result<Design> {
    if let Some(f) = factors.iter().find(|f| f.n_levels() != 2) {
        return Err(Error::NonTwoLevelFactor(f.name().to_string()));
    }
    if factors.len() > MAX_LETTERS {
        return Err(Error::InvalidDesign(format!("at most {MAX_LETTERS} two-level factors")));
    }
    let relation = defining_relation(generators, factors.len())?;
    let full = full_factorial(factors)?;
    let runs: Vec<Vec<usize>> =
        full.runs().iter().filter(|run| relation.generators.iter().all(|g| g.evaluate(run) == 1)).cloned().collect();
    let provenance = Provenance::FractionalFactorial {
        generators: generators
            .iter()
            .map(|g| format!("{}={}", g.letters(), if g.sign() < 0 { "-1" } else { "+1" }))
            .collect(),
    };
    Design::new(full.factors().to_vec(), runs, provenance)
}

/// Every control run combined with every noise run, control-major.
pub fn crossed_array(control: &Design, noise: &Design) -> Result<Design> {
    let overlap: Vec<String> = control
        .factors()
        .iter()
        .filter(|c| noise.factors().iter().any(|n| n.name() == c.name()))
        .map(|c| c.name().to_string())
        .collect();
    if !overlap.is_empty() {
        return Err(Error::OverlappingFactors(overlap));
    }
    let control = control.clone().with_roles(Role::Control);
    let noise = noise.clone().with_roles(Role::Noise);
    let mut factors = control.factors().to_vec();
    factors.extend(noise.factors().iter().cloned());
    let runs = control
        .runs()
        .iter()
        .flat_map(|c| {
            noise.runs().iter().map(move |n| {
                let mut r = c.clone();
                r.extend_from_slice(n);
                r
            })
        })
        .collect();
    let provenance = Provenance::Crossed { control: Box::new(control), noise: Box::new(noise) };
    Design::new(factors, runs, provenance)
}

/// A design with no factors and a single empty run; crossing with it only
/// annotates roles.
pub fn null_design() -> Design {
    Design::new(Vec::new(), vec![Vec::new()], Provenance::Manual).expect("valid null design")
}

/// Recover the defining relation of a fractional factorial, or of a crossed
/// array whose parts are full or fractional factorials. `None` when the
/// design is a full factorial or has no recoverable structure.
pub fn relation_of(design: &Design) -> Result<Option<DefiningRelation>> {
    match generators_of(design)? {
        Some(g) if !g.is_empty() => Ok(Some(defining_relation(&g, design.n_factors())?)),
        _ => Ok(None),
    }
}

fn generators_of(design: &Design) -> Result<Option<Vec<Word>>> {
    match design.provenance() {
        Provenance::FullFactorial => Ok(Some(Vec::new())),
        Provenance::FractionalFactorial { generators } => {
            generators.iter().map(|g| Word::parse(g)).collect::<Result<Vec<_>>>().map(Some)
        }
        Provenance::Crossed { control, noise } => {
            let (Some(c), Some(n)) = (generators_of(control)?, generators_of(noise)?) else {
                return Ok(None);
            };
            let shift = control.n_factors();
            let mut all = c;
            all.extend(n.into_iter().map(|w| Word { letters: w.letters << shift, negative: w.negative }));
            Ok(Some(all))
        }
        Provenance::Manual => Ok(None),
    }
}

/// Text report: factor letters, run count, defining relation, resolution and
/// alias table up to `max_order`.
pub fn report(design: &Design, max_order: usize) -> Result<String> {
    let mut out = String::new();
    let factors = design.factors();
    writeln!(out, "Runs: {}", design.n_runs()).unwrap();
    writeln!(out, "Factors:").unwrap();
    for (i, f) in factors.iter().enumerate() {
        let letter = if i < MAX_LETTERS { ((b'A' + i as u8) as char).to_string() } else { "-".into() };
        let levels: Vec<&str> = f.levels().iter().map(|l| l.label.as_str()).collect();
        writeln!(out, "  {letter} = {:<10} [{}] {:?}", f.name(), levels.join(", "), f.role()).unwrap();
    }
    let relation = match relation_of(design)? {
        Some(r) => r,
        None => {
            writeln!(out, "Provenance: {}", provenance_name(design.provenance())).unwrap();
            return Ok(out);
        }
    };
    writeln!(out, "Defining relation: {}", relation.display()).unwrap();
    let res = resolution(&relation)?;
    writeln!(out, "Resolution: {} ({res})", roman(res)).unwrap();
    let aliases = alias_structure(&relation, max_order)?;
    writeln!(out, "Aliases (terms up to order {max_order}):").unwrap();
    for e in &aliases.entries {
        let t = Word::from_term(&e.term);
        let visible: Vec<String> = e.visible(max_order).map(|w| w.to_string()).collect();
        let shown = if visible.is_empty() { format!("clear to order {max_order}") } else { visible.join(" = ") };
        writeln!(out, "  {:<6} {:<24} = {shown}", t.letters(), e.term.label(factors)).unwrap();
    }
    Ok(out)
}

fn provenance_name(p: &Provenance) -> &'static str {
    match p {
        Provenance::FullFactorial => "full factorial",
        Provenance::FractionalFactorial { .. } => "fractional factorial",
        Provenance::Crossed { .. } => "crossed array",
        Provenance::Manual => "manual",
    }
}
