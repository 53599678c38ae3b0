//! Compressing a probability distribution into a few representative points
//! by greedily minimising maximum mean discrepancy (MMD) or kernel Stein
//! discrepancy (KSD) over a finite candidate set.
//!
//! ```no_run
//! use quant_core::{select, CandidateSet, Discrepancy, GaussianMixture, KernelSpec, Mode};
//! use quant_core::{Algorithm, SelectionConfig, TargetModel};
//! use rand::SeedableRng;
//!
//! let mixture = GaussianMixture::isotropic(&[vec![-1.0, 0.0], vec![1.0, 0.0]], 0.2)?;
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
//! let candidates = CandidateSet::new(mixture.sample(500, &mut rng))?;
//! let target = TargetModel::mixture(mixture, Mode::Mmd);
//! let ctx = Discrepancy::new(&candidates, &target, KernelSpec::squared_exponential(0.5)?)?;
//! let result = select(&ctx, &SelectionConfig::new(Algorithm::Nonmyopic, 10, 2))?;
//! println!("{:?} -> {}", result.pi, result.final_mmd_squared());
//! # Ok::<(), quant_core::Error>(())
//! ```

pub mod discrepancy;
pub mod error;
pub mod io;
pub mod kernels;
pub mod points;
pub mod sdr;
pub mod selectors;
pub mod solvers;
pub mod target;

pub use discrepancy::{Discrepancy, EmpiricalMeasure, SelectionState};
pub use error::{Error, ErrorCategory, Result};
pub use io::{diagnose, load_candidates, read_result, read_result_csv, write_result, write_result_to, CandidateFormat, CandidateSet, DiagnosticReport, ResultFormat};
pub use kernels::{gram, median_heuristic, KernelChoice, KernelFamily, KernelSpec, SteinKernel};
pub use points::Points;
pub use sdr::{sdr_assemble, sdr_round, sdr_solve_lowrank, solve_sdr, SdrOptions, SdrProblem, SdrSolution};
pub use selectors::{
    select, select_minibatch, select_myopic, select_nonmyopic, select_oneshot, select_sdr, Algorithm, BatchSchedule,
    BatchStrategy, SelectionConfig, SelectionResult,
};
pub use solvers::{
    solve, solve_branch_bound, solve_exhaustive, solve_simplex_qp, BranchBoundOptions, IqpProblem, IqpSolution, Proof,
    SimplexWeightSolution, SolverKind, SolverOptions,
};
pub use target::{Component, GaussianMixture, Mode, ScoreTarget, TargetModel, TargetSource};
