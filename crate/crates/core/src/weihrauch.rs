//! A small harness for checking reduction witnesses on concrete instances:
//! stream transformers with prefix-dependency tags, the `K⟨id, GH⟩` wiring,
//! reference problems with validators, and fractions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::coded_sets::{Ambient, Ball, NegInfoSet};
use crate::constructions::{
    decode_binary_product, majority_vote, twisted_decode, twisted_stages, BinaryEncoder, Constraint,
};
use crate::error::{Error, Result};
use crate::geometry::distance_to_set;
use crate::points::ExactPoint;
use crate::rat::{fmt_rat, parse_rat, pow2, Rat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
    Undecided,
}

/// An output token and the length of the input prefix it was computed from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub value: Value,
    pub depends_on: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub tokens: Vec<Token>,
}

impl Transcript {
    pub fn values(&self) -> Vec<Value> {
        self.tokens.iter().map(|t| t.value.clone()).collect()
    }

    pub fn tags_nondecreasing(&self) -> bool {
        self.tokens.windows(2).all(|w| w[0].depends_on <= w[1].depends_on)
    }
}

/// A stream transformer given by its output on every finite input prefix.
/// Outputs must extend each other as the prefix grows.
pub trait Transformer: Send + Sync {
    fn name(&self) -> String;
    fn input_kind(&self) -> &'static str;
    fn output_kind(&self) -> &'static str;
    fn output(&self, prefix: &[Value]) -> Result<Vec<Value>>;
}

/// Post-processor `K`: sees the original input (unless the reduction is
/// strong) and the oracle's answer.
pub trait PostProcessor: Send + Sync {
    fn name(&self) -> String;
    fn answer_kind(&self) -> &'static str;
    fn output(&self, original: &[Value], answer: &[Value]) -> Result<Vec<Value>>;
}

fn extend_checked(op: &'static str, tr: &mut Transcript, seen: &mut Vec<Value>, out: Vec<Value>, k: usize) -> Result<()> {
    if out.len() < seen.len() || out[..seen.len()] != seen[..] {
        return Err(Error::Malformed {
            op,
            detail: format!("output at prefix {k} does not extend the earlier output"),
        });
    }
    for v in &out[seen.len()..] {
        tr.tokens.push(Token {
            value: v.clone(),
            depends_on: k,
        });
    }
    *seen = out;
    Ok(())
}

/// Feed prefixes of growing length and tag every new token.
pub fn run_stream(t: &dyn Transformer, input: &[Value]) -> Result<Transcript> {
    let mut tr = Transcript::default();
    let mut seen = Vec::new();
    for k in 0..=input.len() {
        let out = t.output(&input[..k])?;
        extend_checked("run_stream", &mut tr, &mut seen, out, k)?;
    }
    Ok(tr)
}

pub struct FnTransformer<F> {
    name: String,
    kinds: (&'static str, &'static str),
    f: F,
}

impl<F: Fn(&[Value]) -> Result<Vec<Value>> + Send + Sync> FnTransformer<F> {
    pub fn new(name: &str, input_kind: &'static str, output_kind: &'static str, f: F) -> Self {
        FnTransformer {
            name: name.into(),
            kinds: (input_kind, output_kind),
            f,
        }
    }
}

impl<F: Fn(&[Value]) -> Result<Vec<Value>> + Send + Sync> Transformer for FnTransformer<F> {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn input_kind(&self) -> &'static str {
        self.kinds.0
    }
    fn output_kind(&self) -> &'static str {
        self.kinds.1
    }
    fn output(&self, prefix: &[Value]) -> Result<Vec<Value>> {
        (self.f)(prefix)
    }
}

pub struct FnPost<F> {
    name: String,
    kind: &'static str,
    f: F,
}

impl<F: Fn(&[Value], &[Value]) -> Result<Vec<Value>> + Send + Sync> FnPost<F> {
    pub fn new(name: &str, answer_kind: &'static str, f: F) -> Self {
        FnPost {
            name: name.into(),
            kind: answer_kind,
            f,
        }
    }
}

impl<F: Fn(&[Value], &[Value]) -> Result<Vec<Value>> + Send + Sync> PostProcessor for FnPost<F> {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn answer_kind(&self) -> &'static str {
        self.kind
    }
    fn output(&self, original: &[Value], answer: &[Value]) -> Result<Vec<Value>> {
        (self.f)(original, answer)
    }
}

/// Identity on any stream kind.
pub fn identity(kind: &'static str) -> Arc<dyn Transformer> {
    Arc::new(FnTransformer::new("id", kind, kind, |p: &[Value]| Ok(p.to_vec())))
}

/// `K⟨id, G∘H⟩`, or `K∘G∘H` when strong.
pub struct Reduction {
    h: Arc<dyn Transformer>,
    g: Arc<dyn Transformer>,
    k: Arc<dyn PostProcessor>,
    strong: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionLog {
    pub h: Transcript,
    pub g: Transcript,
    /// Tagged with prefix lengths of the original input.
    pub output: Transcript,
}

pub fn compose_reduction(
    h: Arc<dyn Transformer>,
    k: Arc<dyn PostProcessor>,
    g: Arc<dyn Transformer>,
) -> Result<Reduction> {
    if h.output_kind() != g.input_kind() {
        return Err(Error::InvalidArgument {
            op: "compose_reduction",
            detail: format!("H emits {} but G reads {}", h.output_kind(), g.input_kind()),
        });
    }
    if g.output_kind() != k.answer_kind() {
        return Err(Error::InvalidArgument {
            op: "compose_reduction",
            detail: format!("G emits {} but K reads {}", g.output_kind(), k.answer_kind()),
        });
    }
    Ok(Reduction {
        h,
        g,
        k,
        strong: false,
    })
}

impl Reduction {
    pub fn strong(mut self) -> Self {
        self.strong = true;
        self
    }

    fn eval(&self, prefix: &[Value]) -> Result<Vec<Value>> {
        let hy = self.h.output(prefix)?;
        let gy = self.g.output(&hy)?;
        let orig: &[Value] = if self.strong { &[] } else { prefix };
        self.k.output(orig, &gy)
    }

    pub fn run(&self, input: &[Value]) -> Result<ReductionLog> {
        let h = run_stream(self.h.as_ref(), input)?;
        let g = run_stream(self.g.as_ref(), &h.values())?;
        let mut output = Transcript::default();
        let mut seen = Vec::new();
        for n in 0..=input.len() {
            let out = self.eval(&input[..n])?;
            extend_checked("compose_reduction", &mut output, &mut seen, out, n)?;
        }
        Ok(ReductionLog { h, g, output })
    }
}

impl Transformer for Reduction {
    fn name(&self) -> String {
        format!("{}<id, {}∘{}>", self.k.name(), self.g.name(), self.h.name())
    }
    fn input_kind(&self) -> &'static str {
        self.h.input_kind()
    }
    fn output_kind(&self) -> &'static str {
        "any"
    }
    fn output(&self, prefix: &[Value]) -> Result<Vec<Value>> {
        self.eval(prefix)
    }
}

type Validator = dyn Fn(&Value, &Value, &Rat) -> Result<Verdict> + Send + Sync;

/// A multi-valued problem known through a validator of candidate solutions.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    validator: Arc<Validator>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem").field("name", &self.name).finish()
    }
}

impl Problem {
    pub fn new(name: &str, v: impl Fn(&Value, &Value, &Rat) -> Result<Verdict> + Send + Sync + 'static) -> Self {
        Problem {
            name: name.into(),
            validator: Arc::new(v),
        }
    }

    pub fn validate(&self, instance: &Value, candidate: &Value, tol: &Rat) -> Result<Verdict> {
        (self.validator)(instance, candidate, tol)
    }
}

fn malformed(op: &'static str, e: impl std::fmt::Display) -> Error {
    Error::Malformed {
        op,
        detail: e.to_string(),
    }
}

fn point_of(op: &'static str, v: &Value) -> Result<Vec<Rat>> {
    let arr = v.as_array().ok_or_else(|| malformed(op, "point must be an array"))?;
    arr.iter()
        .map(|x| match x {
            Value::String(s) => parse_rat(s),
            Value::Number(n) => parse_rat(&n.to_string()),
            _ => Err(malformed(op, "coordinate must be a rational string")),
        })
        .collect()
}

fn point_json(x: &[Rat]) -> Value {
    Value::Array(x.iter().map(|v| Value::String(fmt_rat(v))).collect())
}

/// Closed choice on `[0,1]^n`: the candidate must lie within `tol` of the set.
pub fn closed_choice(n: usize) -> Problem {
    Problem::new(&format!("C_[0,1]^{n}"), move |inst, cand, tol| {
        let s: NegInfoSet = serde_json::from_value(inst.clone()).map_err(|e| malformed("closed_choice", e))?;
        let x = point_of("closed_choice", cand)?;
        if s.dim() != n || x.len() != n {
            return Err(Error::DimensionMismatch {
                op: "closed_choice",
                expected: n,
                got: x.len(),
            });
        }
        // the residual contains the set, so a far candidate is wrong
        match distance_to_set(&s.residual(), &x) {
            None => Ok(Verdict::Reject),
            Some(d) if &d > tol => Ok(Verdict::Reject),
            Some(_) if s.is_exhausted() => Ok(Verdict::Accept),
            Some(_) => Ok(Verdict::Undecided),
        }
    })
}

/// Connected choice validates like closed choice; the promise is on instances.
pub fn connected_choice(n: usize) -> Problem {
    let base = closed_choice(n);
    Problem::new(&format!("ConC_{n}"), move |i, c, t| base.validate(i, c, t))
}

/// An LLPO instance: zeros with at most one 1, at position `2i + j + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlpoInstance {
    pub one_at: Option<usize>,
}

pub fn llpo_instance(k: Option<usize>, j: u8) -> LlpoInstance {
    LlpoInstance {
        one_at: k.map(|i| 2 * i + j as usize + 1),
    }
}

impl LlpoInstance {
    pub fn prefix(&self, len: usize) -> Vec<u8> {
        (0..len).map(|p| u8::from(Some(p) == self.one_at)).collect()
    }
}

/// `b` is a solution iff `p(2m + b) = 0` for all `m`.
pub fn llpo_validate(inst: &LlpoInstance, answer: u8) -> Result<Verdict> {
    if answer > 1 {
        return Err(malformed("llpo_validate", "answer must be 0 or 1"));
    }
    Ok(match inst.one_at {
        Some(p) if p % 2 == answer as usize => Verdict::Reject,
        _ => Verdict::Accept,
    })
}

/// The same judgement from a finite prefix only.
pub fn llpo_validate_prefix(prefix: &[u8], answer: u8) -> Result<Verdict> {
    let ones: Vec<usize> = (0..prefix.len()).filter(|&p| prefix[p] != 0).collect();
    match ones.as_slice() {
        [] => Ok(Verdict::Undecided),
        [p] => llpo_validate(&LlpoInstance { one_at: Some(*p) }, answer),
        _ => Err(malformed("llpo_validate", "more than one nonzero entry")),
    }
}

pub fn llpo() -> Problem {
    Problem::new("LLPO", |inst, cand, _| {
        let i: LlpoInstance = serde_json::from_value(inst.clone()).map_err(|e| malformed("llpo", e))?;
        let b = cand.as_u64().ok_or_else(|| malformed("llpo", "answer must be a bit"))?;
        llpo_validate(&i, b.min(2) as u8)
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitsInstance {
    pub n: usize,
    pub constraints: Vec<Constraint>,
}

/// `C_{0,1}^n`-style choice: every revealed constraint must be respected.
pub fn bits_choice() -> Problem {
    Problem::new("C_{0,1}^*", |inst, cand, _| {
        let i: BitsInstance = serde_json::from_value(inst.clone()).map_err(|e| malformed("bits_choice", e))?;
        let bits: Vec<u8> = serde_json::from_value(cand.clone()).map_err(|e| malformed("bits_choice", e))?;
        if bits.len() != i.n {
            return Ok(Verdict::Reject);
        }
        let ok = i.constraints.iter().all(|c| c.slot >= 1 && c.slot <= i.n && bits[c.slot - 1] != c.forbid);
        Ok(if ok { Verdict::Accept } else { Verdict::Reject })
    })
}

/// `(n/m)·P`: an `m`-tuple of which at least `n` entries solve `P`.
pub fn fraction(p: Problem, n: usize, m: usize) -> Result<Problem> {
    if n == 0 || n > m {
        return Err(Error::InvalidArgument {
            op: "fraction",
            detail: format!("needs 0 < n <= m, got {n}/{m}"),
        });
    }
    let name = format!("({n}/{m}){}", p.name);
    Ok(Problem::new(&name, move |inst, cand, tol| {
        let arr = cand.as_array().ok_or_else(|| malformed("fraction", "candidate must be an array"))?;
        if arr.len() != m {
            return Ok(Verdict::Reject);
        }
        let (mut acc, mut rej) = (0, 0);
        for c in arr {
            match p.validate(inst, c, tol)? {
                Verdict::Accept => acc += 1,
                Verdict::Reject => rej += 1,
                Verdict::Undecided => {}
            }
        }
        Ok(if acc >= n {
            Verdict::Accept
        } else if rej > m - n {
            Verdict::Reject
        } else {
            Verdict::Undecided
        })
    }))
}

/// End-of-stream marker for exhausted instances.
pub fn end_marker() -> Value {
    json!({"exhausted": true})
}

fn is_end(v: &Value) -> bool {
    v.get("exhausted").and_then(Value::as_bool) == Some(true)
}

/// An exhausted set as a token stream: its balls, then the end marker.
pub fn set_stream(s: &NegInfoSet) -> Vec<Value> {
    let mut v: Vec<Value> = s
        .balls()
        .iter()
        .map(|b| serde_json::to_value(b).expect("ball serializes"))
        .collect();
    if s.is_exhausted() {
        v.push(end_marker());
    }
    v
}

fn read_balls(prefix: &[Value]) -> Result<(Vec<Ball>, bool)> {
    let mut balls = Vec::new();
    let mut done = false;
    for v in prefix {
        if is_end(v) {
            done = true;
            break;
        }
        balls.push(serde_json::from_value(v.clone()).map_err(|e| malformed("read_balls", e))?);
    }
    Ok((balls, done))
}

/// A connected-choice stand-in: once the instance is exhausted, answer the
/// least corner of the least box of the residual.
pub fn conc_stub(n: usize, ambient: Ambient) -> Arc<dyn Transformer> {
    Arc::new(FnTransformer::new("ConC-stub", "set", "point", move |p: &[Value]| {
        let (balls, done) = read_balls(p)?;
        if !done {
            return Ok(Vec::new());
        }
        let s = NegInfoSet::exhausted(n, ambient, balls)?;
        let r = s.residual();
        match r.boxes().iter().min() {
            Some(b) => Ok(vec![point_json(&b.lo)]),
            None => Err(Error::PromiseViolated {
                op: "conc_stub",
                detail: "empty instance".into(),
            }),
        }
    }))
}

/// `H` for the twisted cube: stage `k` is released once `k + 1` balls are in.
pub fn twisted_h(stages: usize) -> Arc<dyn Transformer> {
    Arc::new(FnTransformer::new("twisted_cube", "set", "set", move |p: &[Value]| {
        let (balls, done) = read_balls(p)?;
        let ready = if done { stages } else { balls.len().saturating_sub(1).min(stages) };
        let s = NegInfoSet::exhausted(1, Ambient::Unit, balls)?;
        let mut out: Vec<Value> = twisted_stages(&s, ready)?
            .into_iter()
            .flatten()
            .map(|b| serde_json::to_value(&b).expect("ball serializes"))
            .collect();
        if done {
            out.push(end_marker());
        }
        Ok(out)
    }))
}

/// `K` for the twisted cube: decode the oracle's point.
pub fn twisted_k() -> Arc<dyn PostProcessor> {
    Arc::new(FnPost::new("twisted_decode", "point", |_orig: &[Value], ans: &[Value]| {
        let Some(v) = ans.first() else {
            return Ok(Vec::new());
        };
        let x = point_of("twisted_decode", v)?;
        let d = twisted_decode(Arc::new(ExactPoint(x)), 64)?;
        Ok(vec![point_json(&crate::points::PointOracle::approx(&d, &pow2(-30)))])
    }))
}

/// `H` for the bit encoding: constraint tokens in, interval balls out.
pub fn bits_h(n: usize) -> Arc<dyn Transformer> {
    Arc::new(FnTransformer::new("encode_bits", "constraints", "set", move |p: &[Value]| {
        let mut e = BinaryEncoder::new(n)?;
        let mut done = false;
        for v in p {
            if is_end(v) {
                done = true;
                break;
            }
            let c: Constraint = serde_json::from_value(v.clone()).map_err(|e| malformed("encode_bits", e))?;
            e.reveal(c)?;
        }
        let mut out = set_stream(&e.set());
        if !done {
            out.pop();
        }
        Ok(out)
    }))
}

pub fn bits_k(n: usize) -> Arc<dyn PostProcessor> {
    Arc::new(FnPost::new("decode_bits", "point", move |_orig: &[Value], ans: &[Value]| {
        let Some(v) = ans.first() else {
            return Ok(Vec::new());
        };
        let x = point_of("decode_bits", v)?;
        let bits = decode_binary_product(n, &ExactPoint(x))?;
        Ok(vec![json!(bits)])
    }))
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub pipeline: String,
    pub reduction: String,
    pub answer: Option<Value>,
    pub verdict: Verdict,
    #[serde(with = "crate::rat::serde_rat")]
    pub tolerance: Rat,
    pub tags_nondecreasing: bool,
    pub log: ReductionLog,
}

#[derive(Clone, Debug, Deserialize)]
pub struct TwistedInstance {
    pub set: NegInfoSet,
    #[serde(default = "default_stages")]
    pub stages: usize,
}

fn default_stages() -> usize {
    4
}

#[derive(Clone, Debug, Deserialize)]
pub struct MajorityInstance {
    pub n: usize,
    pub constraints: Vec<Constraint>,
    pub k: usize,
    pub m: usize,
}

fn finish(pipeline: &str, r: &Reduction, log: ReductionLog, p: &Problem, inst: &Value, tol: Rat) -> Result<PipelineReport> {
    let answer = log.output.tokens.last().map(|t| t.value.clone());
    let verdict = match &answer {
        Some(a) => p.validate(inst, a, &tol)?,
        None => Verdict::Undecided,
    };
    Ok(PipelineReport {
        pipeline: pipeline.into(),
        reduction: Transformer::name(r),
        answer,
        verdict,
        tolerance: tol,
        tags_nondecreasing: log.output.tags_nondecreasing() && log.h.tags_nondecreasing() && log.g.tags_nondecreasing(),
        log,
    })
}

/// Closed choice on `[0,1]` through connected choice in dimension three.
pub fn run_twisted(inst: &TwistedInstance) -> Result<PipelineReport> {
    let r = compose_reduction(twisted_h(inst.stages), twisted_k(), conc_stub(3, Ambient::Unit))?;
    let log = r.run(&set_stream(&inst.set))?;
    // the stub answers from a finite stage, so only that resolution is claimed
    let tol = pow2(1 - inst.stages as i32);
    let v = serde_json::to_value(&inst.set).map_err(|e| malformed("run_twisted", e))?;
    finish("twisted", &r, log, &closed_choice(1), &v, tol)
}

/// Bit choice through connected choice on the line.
pub fn run_bits(inst: &BitsInstance) -> Result<PipelineReport> {
    let r = compose_reduction(bits_h(inst.n), bits_k(inst.n), conc_stub(1, Ambient::Unit))?;
    let mut input: Vec<Value> = inst.constraints.iter().map(|c| json!(c)).collect();
    input.push(end_marker());
    let log = r.run(&input)?;
    let v = serde_json::to_value(inst).map_err(|e| malformed("run_bits", e))?;
    finish("bits", &r, log, &bits_choice(), &v, Rat::from_integer(0.into()))
}

/// The correct answer of a bit instance with free slots set to 0.
pub fn canonical_bits(inst: &BitsInstance) -> Vec<u8> {
    let mut bits = vec![0u8; inst.n];
    for c in &inst.constraints {
        if c.slot >= 1 && c.slot <= inst.n {
            bits[c.slot - 1] = 1 - c.forbid;
        }
    }
    bits
}

/// `(k/m)` of a bit problem upgraded to the problem itself by majority vote;
/// the fraction oracle stub puts its `m - k` wrong answers last.
pub fn run_majority(inst: &MajorityInstance) -> Result<PipelineReport> {
    let base = BitsInstance {
        n: inst.n,
        constraints: inst.constraints.clone(),
    };
    let (k, m) = (inst.k, inst.m);
    if 2 * k <= m {
        return Err(Error::InvalidArgument {
            op: "run_majority",
            detail: format!("needs 2k > m, got k={k}, m={m}"),
        });
    }
    let good = canonical_bits(&base);
    let g = Arc::new(FnTransformer::new("fraction-stub", "constraints", "tuple", move |p: &[Value]| {
        if !p.last().is_some_and(is_end) {
            return Ok(Vec::new());
        }
        let bad: Vec<u8> = good.iter().map(|b| 1 - b).collect();
        let tuple: Vec<Vec<u8>> = (0..m).map(|i| if i < k { good.clone() } else { bad.clone() }).collect();
        Ok(vec![json!(tuple)])
    }));
    let kp = Arc::new(FnPost::new("majority_vote", "tuple", move |_o: &[Value], ans: &[Value]| {
        let Some(v) = ans.first() else {
            return Ok(Vec::new());
        };
        let tuple: Vec<Vec<u8>> = serde_json::from_value(v.clone()).map_err(|e| malformed("majority_vote", e))?;
        let streams: Vec<Vec<bool>> = tuple.iter().map(|a| a.iter().map(|&b| b == 1).collect()).collect();
        let out: Vec<u8> = majority_vote(&streams, k)?.into_iter().map(u8::from).collect();
        Ok(vec![json!(out)])
    }));
    let r = compose_reduction(identity("constraints"), kp, g)?;
    let mut input: Vec<Value> = inst.constraints.iter().map(|c| json!(c)).collect();
    input.push(end_marker());
    let log = r.run(&input)?;
    let v = serde_json::to_value(&base).map_err(|e| malformed("run_majority", e))?;
    finish("majority", &r, log, &bits_choice(), &v, Rat::from_integer(0.into()))
}

pub fn run_pipeline(name: &str, instance: &Value) -> Result<PipelineReport> {
    let parse = |e: serde_json::Error| Error::Parse {
        op: "run_pipeline",
        detail: e.to_string(),
    };
    match name {
        "twisted" => run_twisted(&serde_json::from_value(instance.clone()).map_err(parse)?),
        "bits" => run_bits(&serde_json::from_value(instance.clone()).map_err(parse)?),
        "majority" => run_majority(&serde_json::from_value(instance.clone()).map_err(parse)?),
        other => Err(Error::InvalidArgument {
            op: "run_pipeline",
            detail: format!("unknown pipeline {other}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{int, rat};

    fn third() -> NegInfoSet {
        NegInfoSet::exhausted(
            1,
            Ambient::Unit,
            vec![
                Ball::new(vec![rat(-1, 3)], rat(2, 3)).unwrap(),
                Ball::new(vec![int(1)], rat(2, 3)).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn identity_wiring_echoes_g() {
        let g: Arc<dyn Transformer> = Arc::new(FnTransformer::new("double", "n", "n", |p: &[Value]| {
            Ok(p.iter().map(|v| json!(v.as_i64().unwrap() * 2)).collect())
        }));
        let k: Arc<dyn PostProcessor> = Arc::new(FnPost::new("snd", "n", |_o: &[Value], a: &[Value]| Ok(a.to_vec())));
        let r = compose_reduction(identity("n"), k, g).unwrap();
        let log = r.run(&[json!(1), json!(2), json!(3)]).unwrap();
        assert_eq!(log.output.values(), vec![json!(2), json!(4), json!(6)]);
        assert_eq!(
            log.output.tokens.iter().map(|t| t.depends_on).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        let again = r.run(&[json!(1), json!(2), json!(3)]).unwrap();
        assert_eq!(serde_json::to_string(&again).unwrap(), serde_json::to_string(&log).unwrap());
    }

    #[test]
    fn wiring_rejects_kind_mismatch() {
        let k: Arc<dyn PostProcessor> = Arc::new(FnPost::new("k", "point", |_o: &[Value], a: &[Value]| Ok(a.to_vec())));
        assert!(compose_reduction(identity("set"), k, identity("bits")).is_err());
    }

    #[test]
    fn non_monotone_transformers_are_caught() {
        let t = FnTransformer::new("flip", "x", "x", |p: &[Value]| Ok(vec![json!(p.len())]));
        assert!(matches!(run_stream(&t, &[json!(0)]), Err(Error::Malformed { .. })));
    }

    #[test]
    fn llpo_examples() {
        let zero = llpo_instance(None, 0);
        assert_eq!(llpo_validate(&zero, 0).unwrap(), Verdict::Accept);
        assert_eq!(llpo_validate(&zero, 1).unwrap(), Verdict::Accept);
        assert_eq!(llpo_validate(&LlpoInstance { one_at: Some(4) }, 0).unwrap(), Verdict::Reject);
        assert_eq!(llpo_validate(&LlpoInstance { one_at: Some(3) }, 0).unwrap(), Verdict::Accept);
        let p = llpo_instance(Some(1), 0).prefix(6);
        assert_eq!(p, vec![0, 0, 0, 1, 0, 0]);
        assert_eq!(llpo_validate_prefix(&p[..2], 1).unwrap(), Verdict::Undecided);
        assert_eq!(llpo_validate_prefix(&p, 1).unwrap(), Verdict::Reject);
        assert!(llpo_validate_prefix(&[1, 1], 0).is_err());
    }

    #[test]
    fn fraction_examples() {
        let inst = serde_json::to_value(third()).unwrap();
        let half = fraction(closed_choice(1), 1, 2).unwrap();
        let tol = pow2(-10);
        assert_eq!(half.validate(&inst, &json!([["1/3"], ["9/10"]]), &tol).unwrap(), Verdict::Accept);
        assert_eq!(half.validate(&inst, &json!([["1/2"], ["9/10"]]), &tol).unwrap(), Verdict::Reject);
        let two = fraction(closed_choice(1), 2, 3).unwrap();
        assert_eq!(
            two.validate(&inst, &json!([["1/3"], ["9/10"], ["1/3"]]), &tol).unwrap(),
            Verdict::Accept
        );
        assert!(fraction(closed_choice(1), 3, 2).is_err());
    }

    #[test]
    fn twisted_pipeline() {
        let r = run_twisted(&TwistedInstance { set: third(), stages: 4 }).unwrap();
        assert_eq!(r.verdict, Verdict::Accept);
        assert!(r.tags_nondecreasing);
    }

    #[test]
    fn bits_pipeline_exhaustive_small() {
        for n in 1..=3usize {
            for pat in 0..3usize.pow(n as u32) {
                let mut cs = Vec::new();
                let mut t = pat;
                for slot in 1..=n {
                    match t % 3 {
                        0 => {}
                        f => cs.push(Constraint { slot, forbid: (f - 1) as u8 }),
                    }
                    t /= 3;
                }
                let r = run_bits(&BitsInstance { n, constraints: cs }).unwrap();
                assert_eq!(r.verdict, Verdict::Accept);
            }
        }
    }

    #[test]
    fn majority_pipeline() {
        let inst = MajorityInstance {
            n: 3,
            constraints: vec![Constraint { slot: 2, forbid: 0 }],
            k: 2,
            m: 3,
        };
        assert_eq!(run_majority(&inst).unwrap().verdict, Verdict::Accept);
    }
}
