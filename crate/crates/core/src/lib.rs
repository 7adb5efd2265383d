//! Focused breadth-first web crawler.
//!
//! Pages are scored by how often the query occurs in each HTML region (meta
//! contents, URL, title, headings, body), each region carrying its own
//! integer weight. Pages at or below the relevance threshold are discarded
//! and the rest are reported in descending weight order.

pub mod canonical;
pub mod fetcher;
pub mod frontier;
pub mod html;
pub mod relevance;
pub mod baseline;
pub mod corpus;
pub mod engine;
pub mod evaluator;
pub mod cli;
