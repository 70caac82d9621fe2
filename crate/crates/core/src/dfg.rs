//! Dataflow graphs of accelerator kernels, ASAP scheduling and bit-level
//! evaluation.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::FixedPointFormat;

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpKind {
    Input,
    /// Hard-wired constant operand. Not a feature.
    Const,
    Add,
    Sub,
    Mul,
    ConstMul,
    Neg,
    Output,
}

impl OpKind {
    pub fn arity(self) -> usize {
        match self {
            OpKind::Input | OpKind::Const => 0,
            OpKind::ConstMul | OpKind::Neg | OpKind::Output => 1,
            OpKind::Add | OpKind::Sub | OpKind::Mul => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Input => "input",
            OpKind::Const => "const",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::ConstMul => "const-mul",
            OpKind::Neg => "neg",
            OpKind::Output => "output",
        }
    }

    /// Arithmetic results that the approximate datapath truncates.
    pub fn is_approximable(self) -> bool {
        matches!(
            self,
            OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::ConstMul
        )
    }

    /// Operations performed by a functional unit (and therefore cost energy).
    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::ConstMul | OpKind::Neg
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpNode {
    pub id: NodeId,
    pub kind: OpKind,
    pub operands: Vec<NodeId>,
    /// Cycles; zero for sources.
    pub latency: u32,
    pub approximable: bool,
    /// Coefficient of `ConstMul`, value of `Const`.
    pub constant: Option<f64>,
    pub label: String,
}

/// Cycle cost per operation kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpLatencies {
    pub add: u32,
    pub sub: u32,
    pub neg: u32,
    pub mul: u32,
    pub const_mul: u32,
    /// Result write-back.
    pub output: u32,
}

impl Default for OpLatencies {
    fn default() -> Self {
        Self {
            add: 1,
            sub: 1,
            neg: 1,
            mul: 2,
            const_mul: 2,
            output: 1,
        }
    }
}

impl OpLatencies {
    pub fn get(&self, kind: OpKind) -> u32 {
        match kind {
            OpKind::Input | OpKind::Const => 0,
            OpKind::Add => self.add,
            OpKind::Sub => self.sub,
            OpKind::Neg => self.neg,
            OpKind::Mul => self.mul,
            OpKind::ConstMul => self.const_mul,
            OpKind::Output => self.output,
        }
    }
}

/// An unscheduled operator graph.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dfg {
    pub name: String,
    pub nodes: Vec<OpNode>,
}

impl Dfg {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            nodes: Vec::new(),
        }
    }

    fn push(
        &mut self,
        kind: OpKind,
        operands: Vec<NodeId>,
        constant: Option<f64>,
        label: String,
    ) -> NodeId {
        let id = self.nodes.len();
        debug_assert!(operands.iter().all(|&o| o < id));
        debug_assert_eq!(operands.len(), kind.arity());
        self.nodes.push(OpNode {
            id,
            kind,
            operands,
            latency: 0,
            approximable: kind.is_approximable(),
            constant,
            label,
        });
        id
    }

    pub fn input(&mut self, label: impl Into<String>) -> NodeId {
        self.push(OpKind::Input, vec![], None, label.into())
    }

    pub fn constant(&mut self, value: f64) -> NodeId {
        self.push(OpKind::Const, vec![], Some(value), format!("{value}"))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let label = format!("n{}+n{}", a, b);
        self.push(OpKind::Add, vec![a, b], None, label)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let label = format!("n{}-n{}", a, b);
        self.push(OpKind::Sub, vec![a, b], None, label)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let label = format!("n{}*n{}", a, b);
        self.push(OpKind::Mul, vec![a, b], None, label)
    }

    pub fn const_mul(&mut self, a: NodeId, coefficient: f64) -> NodeId {
        let label = format!("{coefficient}*n{a}");
        self.push(OpKind::ConstMul, vec![a], Some(coefficient), label)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.push(OpKind::Neg, vec![a], None, format!("-n{a}"))
    }

    pub fn output(&mut self, a: NodeId, label: impl Into<String>) -> NodeId {
        self.push(OpKind::Output, vec![a], None, label.into())
    }

    /// Sums terms with a balanced adder tree.
    pub fn sum_tree(&mut self, terms: &[NodeId]) -> NodeId {
        assert!(!terms.is_empty(), "empty sum");
        let mut level = terms.to_vec();
        while level.len() > 1 {
            let mut next = Vec::with_capacity(level.len().div_ceil(2));
            for pair in level.chunks(2) {
                next.push(match *pair {
                    [a, b] => self.add(a, b),
                    [a] => a,
                    _ => unreachable!(),
                });
            }
            level = next;
        }
        level[0]
    }
}

/// An operator graph annotated with ASAP finish cycles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduledDfg {
    pub name: String,
    pub nodes: Vec<OpNode>,
    /// Indexed by node id.
    pub finish_cycle: Vec<u32>,
    /// Accelerator latency (largest finish cycle).
    pub latency: u32,
    /// Topological evaluation order.
    order: Vec<NodeId>,
}

/// ASAP list scheduling with unconstrained resources.
///
/// Sources finish at cycle 1 and every other node at the latest operand
/// finish plus its own latency. Output nodes commit together, at the cycle
/// of the latest output.
pub fn schedule_asap(graph: &Dfg, latencies: &OpLatencies) -> Result<ScheduledDfg> {
    let n = graph.nodes.len();
    let mut nodes = graph.nodes.clone();
    for (i, node) in nodes.iter_mut().enumerate() {
        if node.id != i {
            return Err(Error::MalformedGraph(format!(
                "node at position {i} carries id {}",
                node.id
            )));
        }
        if node.operands.len() != node.kind.arity() {
            return Err(Error::MalformedGraph(format!(
                "{} node {i} has {} operands",
                node.kind.name(),
                node.operands.len()
            )));
        }
        if let Some(&bad) = node.operands.iter().find(|&&o| o >= n) {
            return Err(Error::MalformedGraph(format!(
                "node {i} references missing node {bad}"
            )));
        }
        if matches!(node.kind, OpKind::Input | OpKind::Const) {
            node.latency = 0;
        } else {
            node.latency = latencies.get(node.kind);
            if node.latency == 0 {
                return Err(Error::InvalidParameter(format!(
                    "latency of {} must be at least one cycle",
                    node.kind.name()
                )));
            }
        }
    }

    // Kahn's algorithm; a leftover node means a cycle.
    let mut indegree: Vec<usize> = nodes.iter().map(|n| n.operands.len()).collect();
    let mut users: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for node in &nodes {
        for &o in &node.operands {
            users[o].push(node.id);
        }
    }
    let mut ready: VecDeque<NodeId> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(id) = ready.pop_front() {
        order.push(id);
        for &u in &users[id] {
            indegree[u] -= 1;
            if indegree[u] == 0 {
                ready.push_back(u);
            }
        }
    }
    if order.len() != n {
        let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap_or(0);
        return Err(Error::Cycle(stuck));
    }

    let mut finish = vec![0u32; n];
    for &id in &order {
        let node = &nodes[id];
        finish[id] = if node.operands.is_empty() {
            1
        } else {
            node.operands.iter().map(|&o| finish[o]).max().unwrap_or(0) + node.latency
        };
    }
    let commit = nodes
        .iter()
        .filter(|n| n.kind == OpKind::Output)
        .map(|n| finish[n.id])
        .max();
    if let Some(commit) = commit {
        for node in nodes.iter().filter(|n| n.kind == OpKind::Output) {
            finish[node.id] = commit;
        }
    }
    let latency = finish.iter().copied().max().unwrap_or(0);

    Ok(ScheduledDfg {
        name: graph.name.clone(),
        nodes,
        finish_cycle: finish,
        latency,
        order,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Exact,
    Approximate,
}

/// Every node's value for one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub raw: Vec<i64>,
    pub values: Vec<f64>,
    /// Nodes whose result saturated.
    pub saturated: Vec<NodeId>,
}

impl Trace {
    pub fn overflowed(&self) -> bool {
        !self.saturated.is_empty()
    }
}

impl ScheduledDfg {
    pub fn inputs(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.kind == OpKind::Input)
            .map(|n| n.id)
    }

    pub fn outputs(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.kind == OpKind::Output)
            .map(|n| n.id)
    }

    pub fn input_count(&self) -> usize {
        self.inputs().count()
    }

    /// Nodes usable as predictor features (everything except constants).
    pub fn feature_nodes(&self) -> impl Iterator<Item = &OpNode> + '_ {
        self.nodes.iter().filter(|n| n.kind != OpKind::Const)
    }

    pub fn feature_count(&self) -> usize {
        self.feature_nodes().count()
    }

    /// Re-checks the scheduling recurrence. Returns the first offending node.
    pub fn check_schedule(&self) -> std::result::Result<(), NodeId> {
        let commit = self.outputs().map(|o| self.finish_cycle[o]).max();
        for node in &self.nodes {
            if node.operands.iter().any(|&o| o >= node.id) {
                return Err(node.id);
            }
            let ready = node
                .operands
                .iter()
                .map(|&o| self.finish_cycle[o])
                .max()
                .unwrap_or(0);
            let ok = match node.kind {
                OpKind::Input | OpKind::Const => self.finish_cycle[node.id] == 1,
                OpKind::Output => {
                    self.finish_cycle[node.id] >= ready + node.latency
                        && Some(self.finish_cycle[node.id]) == commit
                }
                _ => self.finish_cycle[node.id] == ready + node.latency,
            };
            if !ok || self.finish_cycle[node.id] > self.latency {
                return Err(node.id);
            }
        }
        Ok(())
    }

    /// Evaluates the graph on one input vector.
    ///
    /// Overflowing results saturate and are reported in the trace. In
    /// approximate mode every approximable result is truncated.
    pub fn evaluate(
        &self,
        inputs: &[f64],
        mode: EvalMode,
        fmt: &FixedPointFormat,
    ) -> Result<Trace> {
        let n_inputs = self.input_count();
        if inputs.len() != n_inputs {
            return Err(Error::LengthMismatch {
                expected: n_inputs,
                got: inputs.len(),
            });
        }
        let mut raw = vec![0i64; self.nodes.len()];
        let mut saturated = Vec::new();
        // Inputs bind in id order.
        let mut next_input = inputs.iter();
        let mut input_raw = vec![0i64; self.nodes.len()];
        for node in self.nodes.iter().filter(|n| n.kind == OpKind::Input) {
            let (r, sat) = fmt.quantize(*next_input.next().expect("counted above"));
            if sat {
                saturated.push(node.id);
            }
            input_raw[node.id] = r;
        }

        for &id in &self.order {
            let node = &self.nodes[id];
            let op = |k: usize| raw[node.operands[k]];
            let (value, sat) = match node.kind {
                OpKind::Input => (input_raw[id], false),
                OpKind::Const => fmt.quantize(node.constant.unwrap_or(0.0)),
                OpKind::Add => fmt.saturate(op(0) + op(1)),
                OpKind::Sub => fmt.saturate(op(0) - op(1)),
                OpKind::Neg => fmt.saturate(-op(0)),
                OpKind::Mul => fmt.saturate(fmt.mul_raw(op(0), op(1))),
                OpKind::ConstMul => {
                    let (c, _) = fmt.quantize(node.constant.unwrap_or(0.0));
                    fmt.saturate(fmt.mul_raw(op(0), c))
                }
                OpKind::Output => (op(0), false),
            };
            if sat && node.kind != OpKind::Input {
                saturated.push(id);
            }
            raw[id] = if mode == EvalMode::Approximate && node.approximable {
                fmt.truncate(value)
            } else {
                value
            };
        }
        let values = raw.iter().map(|&r| fmt.to_real(r)).collect();
        saturated.sort_unstable();
        Ok(Trace {
            raw,
            values,
            saturated,
        })
    }

    /// Textual node list: `id kind operands finish_cycle label`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {} latency={} nodes={} features={}",
            self.name,
            self.latency,
            self.nodes.len(),
            self.feature_count()
        );
        for node in &self.nodes {
            let operands = node
                .operands
                .iter()
                .map(|o| o.to_string())
                .collect::<Vec<_>>()
                .join(",");
            let operands = if operands.is_empty() {
                "-".to_string()
            } else {
                operands
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                node.id,
                node.kind.name(),
                operands,
                self.finish_cycle[node.id],
                node.label
            );
        }
        out
    }
}
