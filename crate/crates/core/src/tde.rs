//! Type-directed encoders: an encoder for a compound type is assembled from
//! encoders of its parts, one rule per type constructor.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::tokens::{self, PAD, VOCAB_SIZE};
use crate::icc::{AbstractFilter, AbstractIntent};
use crate::nn::{
    Activation, BinaryTreeCache, BinaryTreeLstm, ChildSumCache, ChildSumTreeLstm, ConvBank,
    ConvCache, Dense, DenseCache, Embedding, Gradients, Init, Lstm, LstmCache, NnError, NodeState,
    ParamId, ParamStore, Tensor, KERNEL_COUNTS, KERNEL_SIZES,
};
use crate::pattern::PatternString;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TypeDescriptor {
    Real,
    Categorical {
        cardinality: usize,
    },
    Unit,
    List {
        elem: Box<TypeDescriptor>,
    },
    Set {
        elem: Box<TypeDescriptor>,
    },
    Prod {
        left: Box<TypeDescriptor>,
        right: Box<TypeDescriptor>,
    },
    Sum {
        left: Box<TypeDescriptor>,
        right: Box<TypeDescriptor>,
    },
}

impl TypeDescriptor {
    pub fn list(elem: TypeDescriptor) -> Self {
        Self::List {
            elem: Box::new(elem),
        }
    }

    pub fn set(elem: TypeDescriptor) -> Self {
        Self::Set {
            elem: Box::new(elem),
        }
    }

    pub fn prod(left: TypeDescriptor, right: TypeDescriptor) -> Self {
        Self::Prod {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn sum(left: TypeDescriptor, right: TypeDescriptor) -> Self {
        Self::Sum {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Strings over the token vocabulary.
    pub fn string() -> Self {
        Self::list(Self::Categorical {
            cardinality: VOCAB_SIZE,
        })
    }

    pub fn depth(&self) -> usize {
        match self {
            Self::Real | Self::Categorical { .. } | Self::Unit => 0,
            Self::List { elem } | Self::Set { elem } => 1 + elem.depth(),
            Self::Prod { left, right } | Self::Sum { left, right } => {
                1 + left.depth().max(right.depth())
            }
        }
    }

    fn is_string(&self) -> bool {
        matches!(self, Self::List { elem } if matches!(**elem, Self::Categorical { .. }))
    }
}

impl fmt::Display for TypeDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Real => f.write_str("R"),
            Self::Categorical { cardinality } => write!(f, "C{cardinality}"),
            Self::Unit => f.write_str("Ω"),
            Self::List { elem } => write!(f, "L({elem})"),
            Self::Set { elem } => write!(f, "S({elem})"),
            Self::Prod { left, right } => write!(f, "({left} × {right})"),
            Self::Sum { left, right } => write!(f, "({left} + {right})"),
        }
    }
}

/// `(L(Σ) + Ω) × S(L(Σ))`: an optional action and a set of categories.
pub fn intent_type() -> TypeDescriptor {
    TypeDescriptor::prod(
        TypeDescriptor::sum(TypeDescriptor::string(), TypeDescriptor::Unit),
        TypeDescriptor::set(TypeDescriptor::string()),
    )
}

/// `S(L(Σ)) × S(L(Σ))`: a set of actions and a set of categories.
pub fn filter_type() -> TypeDescriptor {
    TypeDescriptor::prod(
        TypeDescriptor::set(TypeDescriptor::string()),
        TypeDescriptor::set(TypeDescriptor::string()),
    )
}

/// Runtime values of [`TypeDescriptor`]s.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Cat(usize),
    Unit,
    List(Vec<Value>),
    Set(Vec<Value>),
    Pair(Box<Value>, Box<Value>),
    Left(Box<Value>),
    Right(Box<Value>),
}

impl Value {
    pub fn string(ids: &[usize]) -> Self {
        Value::List(ids.iter().map(|&id| Value::Cat(id)).collect())
    }

    fn pattern(p: &PatternString) -> Self {
        Self::string(&tokens::pattern_tokens(p))
    }

    pub fn pair(left: Value, right: Value) -> Self {
        Value::Pair(Box::new(left), Box::new(right))
    }

    pub fn of_intent(intent: &AbstractIntent) -> Self {
        let action = match &intent.action {
            Some(p) => Value::Left(Box::new(Self::pattern(p))),
            None => Value::Right(Box::new(Value::Unit)),
        };
        let cats = intent.categories.iter().map(Self::pattern).collect();
        Self::pair(action, Value::Set(cats))
    }

    pub fn of_filter(filter: &AbstractFilter) -> Self {
        let acts = filter.actions.iter().map(Self::pattern).collect();
        let cats = filter.categories.iter().map(Self::pattern).collect();
        Self::pair(Value::Set(acts), Value::Set(cats))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Instantiation {
    #[serde(rename = "str-rnn")]
    StrRnn,
    #[serde(rename = "str-cnn")]
    StrCnn,
    #[serde(rename = "typed-simple")]
    TypedSimple,
    #[serde(rename = "typed-tree")]
    TypedTree,
}

impl Instantiation {
    pub const ALL: [Instantiation; 4] = [
        Instantiation::StrRnn,
        Instantiation::StrCnn,
        Instantiation::TypedSimple,
        Instantiation::TypedTree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::StrRnn => "str-rnn",
            Self::StrCnn => "str-cnn",
            Self::TypedSimple => "typed-simple",
            Self::TypedTree => "typed-tree",
        }
    }

    /// Whether inputs are the flat token rendering rather than structured values.
    pub fn is_flat(self) -> bool {
        matches!(self, Self::StrRnn | Self::StrCnn)
    }
}

impl fmt::Display for Instantiation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown instantiation `{0}` (expected str-rnn, str-cnn, typed-simple or typed-tree)")]
pub struct UnknownInstantiation(pub String);

impl FromStr for Instantiation {
    type Err = UnknownInstantiation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| UnknownInstantiation(s.to_owned()))
    }
}

/// Layer widths shared by every instantiation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub embed_dim: usize,
    pub kernel_sizes: Vec<usize>,
    pub kernel_counts: Vec<usize>,
    pub lstm_hidden: usize,
    pub comb_dim: usize,
    /// Classifier widths; the last must be 1.
    pub mlp: Vec<usize>,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            embed_dim: 16,
            kernel_sizes: KERNEL_SIZES.to_vec(),
            kernel_counts: KERNEL_COUNTS.to_vec(),
            lstm_hidden: 128,
            comb_dim: 64,
            mlp: vec![16, 1],
        }
    }
}

impl Hyper {
    fn conv_dim(&self) -> usize {
        self.kernel_counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Flat {
    Conv {
        sizes: Vec<usize>,
        counts: Vec<usize>,
    },
    Lstm {
        hidden: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggr {
    Sum,
    ChildSumTreeLstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comb {
    DenseRelu,
    BinaryTreeLstm,
}

/// Structural description of an encoder: each node mirrors a type constructor and
/// records the function chosen for it and its output width.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderSpec {
    Real,
    Categorical {
        cardinality: usize,
        dim: usize,
    },
    Unit {
        dim: usize,
    },
    List {
        elem: Box<EncoderSpec>,
        flat: Flat,
        dim: usize,
    },
    Set {
        elem: Box<EncoderSpec>,
        aggr: Aggr,
        dim: usize,
    },
    Prod {
        left: Box<EncoderSpec>,
        right: Box<EncoderSpec>,
        comb: Comb,
        dim: usize,
    },
    Sum {
        left: Box<EncoderSpec>,
        right: Box<EncoderSpec>,
        dim: usize,
    },
}

impl EncoderSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Real => 1,
            Self::Categorical { dim, .. }
            | Self::Unit { dim }
            | Self::List { dim, .. }
            | Self::Set { dim, .. }
            | Self::Prod { dim, .. }
            | Self::Sum { dim, .. } => *dim,
        }
    }

    /// Visits every node, parents before children.
    pub fn walk(&self, visit: &mut impl FnMut(&EncoderSpec)) {
        visit(self);
        match self {
            Self::List { elem, .. } | Self::Set { elem, .. } => elem.walk(visit),
            Self::Prod { left, right, .. } | Self::Sum { left, right, .. } => {
                left.walk(visit);
                right.walk(visit);
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TdeError {
    #[error("{inst} cannot encode values of type {ty}")]
    UnsupportedType { inst: Instantiation, ty: String },
    #[error("branches of a sum must share one width, got {left} and {right}")]
    SumWidthMismatch { left: usize, right: usize },
    #[error("value does not inhabit the encoder's type at a {expected} node")]
    ValueMismatch { expected: &'static str },
    #[error("token id {id} outside a vocabulary of {cardinality}")]
    VocabularyMismatch { id: usize, cardinality: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Chooses a function for every node of `ty` according to `inst`.
pub fn build_encoder(
    ty: &TypeDescriptor,
    inst: Instantiation,
    hyper: &Hyper,
) -> Result<EncoderSpec, TdeError> {
    if inst.is_flat() && !ty.is_string() {
        return Err(TdeError::UnsupportedType {
            inst,
            ty: ty.to_string(),
        });
    }
    build_node(ty, inst, hyper)
}

fn build_node(
    ty: &TypeDescriptor,
    inst: Instantiation,
    hyper: &Hyper,
) -> Result<EncoderSpec, TdeError> {
    let unsupported = || TdeError::UnsupportedType {
        inst,
        ty: ty.to_string(),
    };
    let string_dim = match inst {
        Instantiation::StrRnn => hyper.lstm_hidden,
        _ => hyper.conv_dim(),
    };
    Ok(match ty {
        TypeDescriptor::Real => EncoderSpec::Real,
        TypeDescriptor::Categorical { cardinality } => EncoderSpec::Categorical {
            cardinality: *cardinality,
            dim: hyper.embed_dim,
        },
        TypeDescriptor::Unit => EncoderSpec::Unit { dim: string_dim },
        TypeDescriptor::List { elem } => {
            if !ty.is_string() {
                return Err(unsupported());
            }
            let flat = match inst {
                Instantiation::StrRnn => Flat::Lstm {
                    hidden: hyper.lstm_hidden,
                },
                _ => Flat::Conv {
                    sizes: hyper.kernel_sizes.clone(),
                    counts: hyper.kernel_counts.clone(),
                },
            };
            EncoderSpec::List {
                elem: Box::new(build_node(elem, inst, hyper)?),
                flat,
                dim: string_dim,
            }
        }
        TypeDescriptor::Set { elem } => {
            let elem = build_node(elem, inst, hyper)?;
            let dim = elem.dim();
            let aggr = match inst {
                Instantiation::TypedTree => Aggr::ChildSumTreeLstm,
                _ => Aggr::Sum,
            };
            EncoderSpec::Set {
                elem: Box::new(elem),
                aggr,
                dim,
            }
        }
        TypeDescriptor::Prod { left, right } => {
            let left = build_node(left, inst, hyper)?;
            let right = build_node(right, inst, hyper)?;
            let (comb, dim) = match inst {
                Instantiation::TypedTree => {
                    if left.dim() != right.dim() {
                        return Err(unsupported());
                    }
                    (Comb::BinaryTreeLstm, left.dim())
                }
                _ => (Comb::DenseRelu, hyper.comb_dim),
            };
            EncoderSpec::Prod {
                left: Box::new(left),
                right: Box::new(right),
                comb,
                dim,
            }
        }
        TypeDescriptor::Sum { left, right } => {
            let left = build_node(left, inst, hyper)?;
            let right = build_node(right, inst, hyper)?;
            if left.dim() != right.dim() {
                return Err(TdeError::SumWidthMismatch {
                    left: left.dim(),
                    right: right.dim(),
                });
            }
            let dim = left.dim();
            EncoderSpec::Sum {
                left: Box::new(left),
                right: Box::new(right),
                dim,
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
enum FlatLayer {
    Conv(ConvBank),
    Lstm(Lstm),
}

/// Embedding followed by a sequence summarizer; shared by all string fields of
/// one encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct StringEncoder {
    embedding: Embedding,
    flat: FlatLayer,
}

#[derive(Debug, Clone, PartialEq)]
enum FlatCache {
    Conv(ConvCache),
    Lstm(LstmCache),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StringTrace {
    ids: Vec<usize>,
    x: Tensor,
    cache: FlatCache,
}

impl StringEncoder {
    fn new(
        store: &mut ParamStore,
        name: &str,
        cardinality: usize,
        embed_dim: usize,
        flat: &Flat,
    ) -> Self {
        let embedding = Embedding::new(store, &format!("{name}.embed"), embed_dim, cardinality);
        let flat = match flat {
            Flat::Conv { sizes, counts } => FlatLayer::Conv(ConvBank::new(
                store,
                &format!("{name}.conv"),
                embed_dim,
                sizes,
                counts,
            )),
            Flat::Lstm { hidden } => FlatLayer::Lstm(Lstm::new(
                store,
                &format!("{name}.lstm"),
                embed_dim,
                *hidden,
            )),
        };
        Self { embedding, flat }
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn conv(&self) -> Option<&ConvBank> {
        match &self.flat {
            FlatLayer::Conv(c) => Some(c),
            FlatLayer::Lstm(_) => None,
        }
    }

    /// Ids actually fed to the layers: at least one id, PAD-extended to the
    /// widest kernel for convolutions.
    fn prepared(&self, ids: &[usize]) -> Vec<usize> {
        let min_len = match &self.flat {
            FlatLayer::Conv(c) => c.max_size(),
            FlatLayer::Lstm(_) => 1,
        };
        let mut out = ids.to_vec();
        if out.len() < min_len {
            out.resize(min_len, PAD);
        }
        out
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        ids: &[usize],
    ) -> Result<(Vec<f64>, StringTrace), NnError> {
        let prepared = self.prepared(ids);
        let x = self.embedding.forward(store, &prepared)?;
        let (out, cache) = match &self.flat {
            FlatLayer::Conv(c) => {
                let (y, cache) = c.forward(store, &x, ids.len())?;
                (y, FlatCache::Conv(cache))
            }
            FlatLayer::Lstm(l) => {
                let (y, cache) = l.forward(store, &x, ids.len().max(1))?;
                (y, FlatCache::Lstm(cache))
            }
        };
        Ok((
            out,
            StringTrace {
                ids: prepared,
                x,
                cache,
            },
        ))
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        trace: &StringTrace,
        dout: &[f64],
        grads: &mut Gradients,
    ) {
        let dx = match (&self.flat, &trace.cache) {
            (FlatLayer::Conv(c), FlatCache::Conv(cache)) => {
                c.backward(store, &trace.x, cache, dout, grads)
            }
            (FlatLayer::Lstm(l), FlatCache::Lstm(cache)) => l.backward(store, cache, dout, grads),
            _ => unreachable!("trace produced by a different string encoder"),
        };
        self.embedding.backward(&trace.ids, &dx, grads);
    }

    /// Post-relu convolution responses per kernel and window position.
    pub fn conv_activations(
        &self,
        store: &ParamStore,
        ids: &[usize],
    ) -> Result<Option<Vec<Vec<f64>>>, NnError> {
        let FlatLayer::Conv(conv) = &self.flat else {
            return Ok(None);
        };
        let prepared = self.prepared(ids);
        let x = self.embedding.forward(store, &prepared)?;
        conv.activations(store, &x, ids.len()).map(Some)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum AggrLayer {
    Sum,
    ChildSum(ChildSumTreeLstm),
}

#[derive(Debug, Clone, PartialEq)]
enum CombLayer {
    Dense(Dense),
    Binary(BinaryTreeLstm),
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Real,
    Cat {
        embedding: Embedding,
    },
    Unit {
        vector: ParamId,
    },
    Str,
    Set {
        elem: Box<Node>,
        aggr: AggrLayer,
    },
    Prod {
        left: Box<Node>,
        right: Box<Node>,
        right_dim: usize,
        comb: CombLayer,
    },
    Sum {
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Intermediate results of one forward pass, consumed by the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub enum Trace {
    Leaf,
    Cat(usize),
    Str(StringTrace),
    Set {
        /// Member traces in canonical (aggregation) order.
        elems: Vec<Trace>,
        tree: Option<ChildSumCache>,
    },
    Prod {
        left: Box<Trace>,
        right: Box<Trace>,
        input: Vec<f64>,
        comb: CombTrace,
    },
    Sum {
        left: bool,
        inner: Box<Trace>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CombTrace {
    Dense(DenseCache),
    Binary(BinaryTreeCache),
}

/// An [`EncoderSpec`] bound to parameters in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    spec: EncoderSpec,
    root: Node,
    strings: Option<StringEncoder>,
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

impl Encoder {
    /// Registers the parameters of `spec` under `name` in `store`.
    pub fn new(store: &mut ParamStore, name: &str, spec: &EncoderSpec) -> Self {
        let mut strings = None;
        let root = Self::bind(store, name, spec, &mut strings);
        Self {
            spec: spec.clone(),
            root,
            strings,
        }
    }

    fn bind(
        store: &mut ParamStore,
        path: &str,
        spec: &EncoderSpec,
        strings: &mut Option<StringEncoder>,
    ) -> Node {
        match spec {
            EncoderSpec::Real => Node::Real,
            EncoderSpec::Categorical { cardinality, dim } => Node::Cat {
                embedding: Embedding::new(store, &format!("{path}.embed"), *dim, *cardinality),
            },
            EncoderSpec::Unit { dim } => Node::Unit {
                vector: store.add(
                    format!("{path}.omega"),
                    &[*dim],
                    Init::Uniform {
                        limit: Embedding::INIT_LIMIT,
                    },
                ),
            },
            EncoderSpec::List { elem, flat, .. } => {
                if strings.is_none() {
                    let EncoderSpec::Categorical { cardinality, dim } = **elem else {
                        unreachable!("lists are built only over categorical elements");
                    };
                    let root = path.split('.').next().unwrap_or(path);
                    *strings = Some(StringEncoder::new(
                        store,
                        &format!("{root}.str"),
                        cardinality,
                        dim,
                        flat,
                    ));
                }
                Node::Str
            }
            EncoderSpec::Set { elem, aggr, dim } => {
                let elem = Box::new(Self::bind(store, &format!("{path}.elem"), elem, strings));
                let aggr = match aggr {
                    Aggr::Sum => AggrLayer::Sum,
                    Aggr::ChildSumTreeLstm => AggrLayer::ChildSum(ChildSumTreeLstm::new(
                        store,
                        &format!("{path}.aggr"),
                        0,
                        *dim,
                    )),
                };
                Node::Set { elem, aggr }
            }
            EncoderSpec::Prod {
                left,
                right,
                comb,
                dim,
            } => {
                let l = Box::new(Self::bind(store, &format!("{path}.fst"), left, strings));
                let r = Box::new(Self::bind(store, &format!("{path}.snd"), right, strings));
                let comb = match comb {
                    Comb::DenseRelu => CombLayer::Dense(Dense::new(
                        store,
                        &format!("{path}.comb"),
                        left.dim() + right.dim(),
                        *dim,
                        Activation::Relu,
                    )),
                    Comb::BinaryTreeLstm => CombLayer::Binary(BinaryTreeLstm::new(
                        store,
                        &format!("{path}.comb"),
                        0,
                        *dim,
                    )),
                };
                Node::Prod {
                    left: l,
                    right: r,
                    right_dim: right.dim(),
                    comb,
                }
            }
            EncoderSpec::Sum { left, right, .. } => Node::Sum {
                left: Box::new(Self::bind(store, &format!("{path}.inl"), left, strings)),
                right: Box::new(Self::bind(store, &format!("{path}.inr"), right, strings)),
            },
        }
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn out_dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn string_encoder(&self) -> Option<&StringEncoder> {
        self.strings.as_ref()
    }

    /// Parameter of the ω vector, if the type has a unit branch.
    pub fn unit_vector(&self) -> Option<ParamId> {
        fn find(node: &Node) -> Option<ParamId> {
            match node {
                Node::Unit { vector } => Some(*vector),
                Node::Set { elem, .. } => find(elem),
                Node::Prod { left, right, .. } | Node::Sum { left, right } => {
                    find(left).or_else(|| find(right))
                }
                _ => None,
            }
        }
        find(&self.root)
    }

    pub fn forward(
        &self,
        store: &ParamStore,
        value: &Value,
    ) -> Result<(Vec<f64>, Trace), TdeError> {
        self.eval(store, &self.root, &self.spec, value)
    }

    fn eval(
        &self,
        store: &ParamStore,
        node: &Node,
        spec: &EncoderSpec,
        value: &Value,
    ) -> Result<(Vec<f64>, Trace), TdeError> {
        let mismatch = |expected| TdeError::ValueMismatch { expected };
        let (out, trace) = match (node, spec, value) {
            (Node::Real, _, Value::Real(v)) => (vec![*v], Trace::Leaf),
            (Node::Cat { embedding }, _, Value::Cat(id)) => {
                check_id(*id, embedding.vocab())?;
                let col = embedding.forward(store, &[*id])?.into_data();
                (col, Trace::Cat(*id))
            }
            (Node::Unit { vector }, _, Value::Unit) => {
                (store.get(*vector).data().to_vec(), Trace::Leaf)
            }
            (Node::Str, EncoderSpec::List { .. }, Value::List(items)) => {
                let enc = self
                    .strings
                    .as_ref()
                    .expect("string encoder bound with its node");
                let vocab = enc.embedding.vocab();
                let ids = items
                    .iter()
                    .map(|v| match v {
                        Value::Cat(id) => check_id(*id, vocab).map(|_| *id),
                        _ => Err(mismatch("categorical")),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let (y, t) = enc.forward(store, &ids)?;
                (y, Trace::Str(t))
            }
            (
                Node::Set { elem, aggr },
                EncoderSpec::Set {
                    elem: elem_spec,
                    dim,
                    ..
                },
                Value::Set(items),
            ) => {
                let mut encoded = items
                    .iter()
                    .map(|v| self.eval(store, elem, elem_spec, v))
                    .collect::<Result<Vec<_>, _>>()?;
                encoded.sort_by(|a, b| lexicographic(&a.0, &b.0));
                let (outs, elems): (Vec<Vec<f64>>, Vec<Trace>) = encoded.into_iter().unzip();
                match aggr {
                    AggrLayer::Sum => {
                        let mut acc = vec![0.0; *dim];
                        for o in &outs {
                            crate::nn::axpy(1.0, o, &mut acc);
                        }
                        (acc, Trace::Set { elems, tree: None })
                    }
                    AggrLayer::ChildSum(unit) => {
                        let children: Vec<NodeState> =
                            outs.into_iter().map(NodeState::from_hidden).collect();
                        let (state, cache) = unit.forward(store, &[], &children)?;
                        (
                            state.h,
                            Trace::Set {
                                elems,
                                tree: Some(cache),
                            },
                        )
                    }
                }
            }
            (
                Node::Prod {
                    left, right, comb, ..
                },
                EncoderSpec::Prod {
                    left: ls,
                    right: rs,
                    ..
                },
                Value::Pair(lv, rv),
            ) => {
                let (lo, lt) = self.eval(store, left, ls, lv)?;
                let (ro, rt) = self.eval(store, right, rs, rv)?;
                let (out, comb_trace, input) = match comb {
                    CombLayer::Dense(d) => {
                        let input = [lo, ro].concat();
                        let (y, cache) = d.forward(store, &input)?;
                        (y, CombTrace::Dense(cache), input)
                    }
                    CombLayer::Binary(unit) => {
                        let (state, cache) = unit.forward(
                            store,
                            &[],
                            &NodeState::from_hidden(lo),
                            &NodeState::from_hidden(ro),
                        )?;
                        (state.h, CombTrace::Binary(cache), Vec::new())
                    }
                };
                (
                    out,
                    Trace::Prod {
                        left: Box::new(lt),
                        right: Box::new(rt),
                        input,
                        comb: comb_trace,
                    },
                )
            }
            (Node::Sum { left, .. }, EncoderSpec::Sum { left: ls, .. }, Value::Left(v)) => {
                let (y, t) = self.eval(store, left, ls, v)?;
                (
                    y,
                    Trace::Sum {
                        left: true,
                        inner: Box::new(t),
                    },
                )
            }
            (Node::Sum { right, .. }, EncoderSpec::Sum { right: rs, .. }, Value::Right(v)) => {
                let (y, t) = self.eval(store, right, rs, v)?;
                (
                    y,
                    Trace::Sum {
                        left: false,
                        inner: Box::new(t),
                    },
                )
            }
            (node, _, _) => return Err(mismatch(node_kind(node))),
        };
        if out.len() != spec.dim() {
            return Err(NnError::ShapeMismatch {
                context: "encoder node width",
                expected: spec.dim(),
                got: out.len(),
            }
            .into());
        }
        Ok((out, trace))
    }

    pub fn backward(&self, store: &ParamStore, trace: &Trace, dout: &[f64], grads: &mut Gradients) {
        self.back(store, &self.root, trace, dout, grads);
    }

    fn back(
        &self,
        store: &ParamStore,
        node: &Node,
        trace: &Trace,
        dout: &[f64],
        grads: &mut Gradients,
    ) {
        match (node, trace) {
            (Node::Real, _) => {}
            (Node::Cat { embedding }, Trace::Cat(id)) => {
                let d = Tensor::from_vec(&[dout.len(), 1], dout.to_vec()).expect("column gradient");
                embedding.backward(&[*id], &d, grads);
            }
            (Node::Unit { vector }, _) => crate::nn::axpy(1.0, dout, grads.get_mut(*vector)),
            (Node::Str, Trace::Str(t)) => {
                let enc = self
                    .strings
                    .as_ref()
                    .expect("string encoder bound with its node");
                enc.backward(store, t, dout, grads);
            }
            (Node::Set { elem, aggr }, Trace::Set { elems, tree }) => match (aggr, tree) {
                (AggrLayer::Sum, _) => {
                    for t in elems {
                        self.back(store, elem, t, dout, grads);
                    }
                }
                (AggrLayer::ChildSum(unit), Some(cache)) => {
                    let zero = vec![0.0; dout.len()];
                    let (_, children) = unit.backward(store, cache, dout, &zero, grads);
                    for (t, d) in elems.iter().zip(children) {
                        self.back(store, elem, t, &d.h, grads);
                    }
                }
                _ => unreachable!("set trace does not match its aggregator"),
            },
            (
                Node::Prod {
                    left,
                    right,
                    right_dim,
                    comb,
                },
                Trace::Prod {
                    left: lt,
                    right: rt,
                    input,
                    comb: ct,
                },
            ) => {
                let (dl, dr) = match (comb, ct) {
                    (CombLayer::Dense(d), CombTrace::Dense(cache)) => {
                        let mut dx = d.backward(store, input, cache, dout, grads);
                        let dr = dx.split_off(d.in_dim() - right_dim);
                        (dx, dr)
                    }
                    (CombLayer::Binary(unit), CombTrace::Binary(cache)) => {
                        let zero = vec![0.0; dout.len()];
                        let (_, l, r) = unit.backward(store, cache, dout, &zero, grads);
                        (l.h, r.h)
                    }
                    _ => unreachable!("product trace does not match its combinator"),
                };
                self.back(store, left, lt, &dl, grads);
                self.back(store, right, rt, &dr, grads);
            }
            (
                Node::Sum { left, right },
                Trace::Sum {
                    left: is_left,
                    inner,
                },
            ) => {
                let branch = if *is_left { left } else { right };
                self.back(store, branch, inner, dout, grads);
            }
            _ => unreachable!("trace does not match encoder structure"),
        }
    }
}

fn node_kind(node: &Node) -> &'static str {
    match node {
        Node::Real => "real",
        Node::Cat { .. } => "categorical",
        Node::Unit { .. } => "unit",
        Node::Str => "list",
        Node::Set { .. } => "set",
        Node::Prod { .. } => "product",
        Node::Sum { .. } => "sum",
    }
}

fn check_id(id: usize, cardinality: usize) -> Result<(), TdeError> {
    if id < cardinality {
        Ok(())
    } else {
        Err(TdeError::VocabularyMismatch { id, cardinality })
    }
}
