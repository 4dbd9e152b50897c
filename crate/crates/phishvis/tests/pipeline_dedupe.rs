//! The dedupe contract: a second check of the same URL answers from the
//! store with zero HTTP requests and zero renders.

use httpstub::StubServer;
use phishvis::classifier::{init_model, TrainConfig};
use phishvis::fetcher::FetchConfig;
use phishvis::pipeline::Pipeline;
use phishvis::store::Store;

fn pipeline(dir: &std::path::Path) -> Pipeline {
    let model = init_model(&TrainConfig::default()).unwrap();
    let store = Store::open(dir).unwrap();
    Pipeline::new(store, model, FetchConfig::default())
}

#[test]
fn second_check_hits_the_cache_and_skips_fetch_and_render() {
    let stub = StubServer::start();
    stub.route_ok("/login", b"<html><body><form></form></body></html>");
    let dir = tempfile::tempdir().unwrap();
    let mut pipeline = pipeline(dir.path());

    let first = pipeline.check_url(&stub.url("/login"), false).unwrap();
    assert!(!first.cached);
    assert_eq!(pipeline.counters().fetches, 1);
    assert_eq!(pipeline.counters().renders, 1);
    assert_eq!(stub.hits(), 1);
    assert_eq!(pipeline.store().len(), 1);

    let second = pipeline.check_url(&stub.url("/login"), false).unwrap();
    assert!(second.cached);
    assert_eq!(second.label, first.label);
    assert_eq!(second.confidence, first.confidence);
    assert_eq!(second.image_path, first.image_path);
    // zero new work of any kind
    assert_eq!(pipeline.counters().fetches, 1);
    assert_eq!(pipeline.counters().renders, 1);
    assert_eq!(stub.hits(), 1);
    // cached results report zero fetch/render stage time
    assert_eq!(second.timings.fetch_ms, 0.0);
    assert_eq!(second.timings.render_ms, 0.0);
}

#[test]
fn cache_survives_reopening_the_store() {
    let stub = StubServer::start();
    stub.route_ok("/p", b"<html><body>page</body></html>");
    let dir = tempfile::tempdir().unwrap();

    {
        let mut pipeline = pipeline(dir.path());
        pipeline.check_url(&stub.url("/p"), false).unwrap();
    }
    let mut reopened = pipeline(dir.path());
    let result = reopened.check_url(&stub.url("/p"), false).unwrap();
    assert!(result.cached);
    assert_eq!(stub.hits(), 1);
}

#[test]
fn force_bypasses_the_cache_and_reproduces_identical_output() {
    let stub = StubServer::start();
    stub.route_ok("/fixed", b"<html><body>immutable content</body></html>");
    let dir = tempfile::tempdir().unwrap();
    let mut pipeline = pipeline(dir.path());

    let first = pipeline.check_url(&stub.url("/fixed"), false).unwrap();
    let forced = pipeline.check_url(&stub.url("/fixed"), true).unwrap();
    assert!(!forced.cached);
    assert_eq!(pipeline.counters().fetches, 2);
    assert_eq!(stub.hits(), 2);
    // identical content: identical verdict and identical stored image
    assert_eq!(forced.label, first.label);
    assert_eq!(forced.confidence, first.confidence);
    assert_eq!(forced.image_path, first.image_path);
    // two records now exist for the URL; lookup returns the newest
    assert_eq!(pipeline.store().len(), 2);
}

#[test]
fn equivalent_url_spellings_share_one_cache_entry() {
    let stub = StubServer::start();
    stub.route_ok("/a", b"<html><body>x</body></html>");
    let dir = tempfile::tempdir().unwrap();
    let mut pipeline = pipeline(dir.path());

    let first = pipeline.check_url(&stub.url("/a#frag"), false).unwrap();
    assert!(!first.cached);
    let second = pipeline.check_url(&stub.url("/a"), false).unwrap();
    assert!(second.cached);
    assert_eq!(stub.hits(), 1);
}
