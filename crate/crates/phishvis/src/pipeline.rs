//! The end-to-end URL check: dedupe lookup, fetch, render, classify, persist.
//!
//! A cache hit answers straight from the store with zero HTTP requests and
//! zero renders, which is the whole point of keeping the URL database. The
//! instrumentation counters exist so tests (and operators) can verify that
//! claim instead of trusting it.

use std::time::Instant;

use serde::Serialize;

use crate::bytevis::{encode_png, render};
use crate::classifier::{downsample, predict, Model};
use crate::fetcher::{fetch, normalize_url, FetchConfig};
use crate::hilbert::CurveOrder;
use crate::store::{content_digest, Store, UrlRecord};
use crate::{Label, Result};

/// Milliseconds spent in each executed stage. Stages that did not run
/// (cache hits skip fetch and render) report exactly zero.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct StageTimings {
    pub fetch_ms: f64,
    pub render_ms: f64,
    pub classify_ms: f64,
}

/// Outcome of one URL check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub url: String,
    pub cached: bool,
    pub label: Label,
    pub confidence: f64,
    pub image_path: String,
    pub timings: StageTimings,
}

/// How often the expensive stages actually ran.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub fetches: u64,
    pub renders: u64,
}

/// Owns the store, the model and the fetch limits for a run of checks.
pub struct Pipeline {
    store: Store,
    model: Model,
    fetch_cfg: FetchConfig,
    counters: Counters,
}

impl Pipeline {
    pub fn new(store: Store, model: Model, fetch_cfg: FetchConfig) -> Pipeline {
        Pipeline {
            store,
            model,
            fetch_cfg,
            counters: Counters::default(),
        }
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// Check one URL. `force` bypasses the cache and re-fetches even when a
    /// record exists (content changes are only picked up this way).
    pub fn check_url(&mut self, raw_url: &str, force: bool) -> Result<CheckResult> {
        let url = normalize_url(raw_url)?;

        if !force {
            if let Some(record) = self.store.lookup(&url) {
                return Ok(CheckResult {
                    url: url.as_str().to_string(),
                    cached: true,
                    label: record.label,
                    confidence: record.confidence,
                    image_path: record.image.clone(),
                    timings: StageTimings::default(),
                });
            }
        }

        let t_fetch = Instant::now();
        let page = fetch(&url, &self.fetch_cfg)?;
        self.counters.fetches += 1;
        let fetch_ms = t_fetch.elapsed().as_secs_f64() * 1000.0;

        let t_render = Instant::now();
        let image = render(&page.body, CurveOrder::order7())?;
        self.counters.renders += 1;
        let png = encode_png(&image);
        let render_ms = t_render.elapsed().as_secs_f64() * 1000.0;

        let t_classify = Instant::now();
        let small = downsample(&image, self.model.input_side())?;
        let verdict = predict(&self.model, &small)?;
        let classify_ms = t_classify.elapsed().as_secs_f64() * 1000.0;

        let digest = content_digest(&page.body);
        let image_path = self.store.save_image(&digest, &png)?;
        self.store.put(UrlRecord {
            url: url.clone(),
            digest,
            fetched_at: page.fetched_at,
            label: verdict.label,
            confidence: verdict.confidence,
            image: image_path.clone(),
        })?;

        Ok(CheckResult {
            url: url.as_str().to_string(),
            cached: false,
            label: verdict.label,
            confidence: verdict.confidence,
            image_path,
            timings: StageTimings {
                fetch_ms,
                render_ms,
                classify_ms,
            },
        })
    }
}
