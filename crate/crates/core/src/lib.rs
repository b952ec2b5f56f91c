//! Detrended cross-correlation analysis of multivariate market time series.
//!
//! The crate covers the whole chain from raw transaction ticks to
//! correlation networks:
//!
//! * [`ingest`]: tick file parsing, liquidity selection, per-collection metadata
//! * [`series`]: binned capitalization, log increments, transaction counts
//! * [`diststats`]: CCDFs, tail-law fits and autocorrelation
//! * [`mfdfa`]: multifractal detrended fluctuation and cross-fluctuation functions
//! * [`corrmat`]: Pearson and q-dependent detrended correlation matrices
//! * [`rmt`]: eigen-analysis, Marchenko-Pastur reference law, market-mode filtering
//! * [`mstnet`]: metric distances, minimal spanning trees, Louvain communities
//! * [`synthlab`]: seeded synthetic generators used as verification oracles

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod corrmat;
pub mod diststats;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod mfdfa;
pub mod mstnet;
pub mod rmt;
pub mod rng;
pub mod series;
pub mod synthlab;

pub use corrmat::{CorrKind, CorrMatrix, OffdiagHistogram};
pub use diststats::{AcfCurve, CcdfCurve, TailFit, TailKind};
pub use error::{Error, Result};
pub use ingest::{CollectionMeta, TickRecord, TickTable, Window};
pub use linalg::SymMatrix;
pub use mfdfa::{DetrendConfig, FluctuationGrid, GridKind, HurstResult, SingularitySpectrum};
pub use mstnet::{Communities, CommunityGraph, DegreeDistribution, DistanceMatrix, Tree};
pub use rmt::{FilteredPanel, MpLaw, SpectralDecomposition};
pub use rng::CounterRng;
pub use series::{Observable, Panel, Series};
pub use synthlab::GeneratorSpec;
