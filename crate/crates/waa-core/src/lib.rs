//! Online prediction with the Weak Aggregating Algorithm over quantized
//! elementary experts.
//!
//! The library plays the standard prediction-with-expert-advice protocol:
//! each round Reality announces a signal, the learner announces a prediction,
//! Reality announces an observation, and a bounded loss is charged. The
//! learner aggregates a pool of *elementary* experts — prediction rules that
//! are constant on the cells of an idempotent quantizer of the signal space
//! and take values in a finite prediction grid — using Kalnishkan and
//! Vyugin's Weak Aggregating Algorithm (WAA), the exponential-weights
//! forecaster with round-dependent learning rate `β_n = exp(-1/√n)`.
//!
//! Two engines are provided. The deterministic engine predicts the weighted
//! mean of the expert predictions and requires the loss to be convex in the
//! prediction. The randomized engine runs the same aggregation in the
//! extended game whose predictions are finite-support probability measures;
//! expected loss is linear in the measure, so convexity comes for free and
//! discontinuous losses are admissible.
//!
//! The [`harness`] module drives full games against scripted or adaptive
//! Reality, records regret traces, and numerically verifies the regret
//! bounds the aggregation guarantees: the per-round aggregation inequality,
//! the `O(√N)` cumulative bound with constant `L²·e^L + ln(1/q_K)`, and the
//! iterated-logarithm envelope for sampled randomized paths.
//!
//! References:
//! - Kalnishkan & Vyugin, "The weak aggregating algorithm and weak
//!   mixability" (COLT 2005; JCSS 2008) — Lemmas 5 and 9.
//! - Dudley, "Real Analysis and Probability" (2002), §11.2–11.3 — bounded
//!   Lipschitz norm and the Fortet–Mourier metric.

// `!(x > 0.0)`-style guards are deliberate throughout: the negation also
// rejects NaN, which a plain `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod experts;
pub mod harness;
pub mod losses;
pub mod measures;
pub mod spaces;

pub use error::{Error, Result};
