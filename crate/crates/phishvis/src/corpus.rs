//! Deterministic synthetic HTML corpus for training and evaluation.
//!
//! Real phishing pages are ephemeral and unsafe to fetch in CI, so the
//! experiment corpus is generated: legitimate pages are byte-rich (20-200
//! KiB of navigation, styles, scripts, license comments and detailed forms)
//! while phishing pages are small clones (1-10 KiB, a single login form,
//! barely any links or scripts). Every page is a pure function of
//! (label, category, index, seed), so rebuilds are bit-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::bytevis::{encode_png, render};
use crate::hilbert::CurveOrder;
use crate::rng::{fnv1a, Rng};
use crate::store::{append_manifest, content_digest, Sample, Split};
use crate::{Error, Label, Result};

/// Corpus shape: categories, samples per category, seed and output root.
#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub per_category: usize,
    pub categories: Vec<(String, Label)>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl CorpusConfig {
    /// Default category list: five phishing target brands and their five
    /// legitimate counterparts.
    pub fn default_categories() -> Vec<(String, Label)> {
        let brands = [
            "Bank Of America",
            "PayPal",
            "ABSA",
            "DHL Tracking",
            "Microsoft Login",
        ];
        let mut categories = Vec::with_capacity(10);
        for brand in brands {
            categories.push((format!("{brand} Phish"), Label::Phishing));
        }
        for brand in brands {
            categories.push((format!("{brand} Legitimate"), Label::Legitimate));
        }
        categories
    }

    pub fn new(out_dir: impl Into<PathBuf>) -> CorpusConfig {
        CorpusConfig {
            per_category: 250,
            categories: Self::default_categories(),
            seed: 42,
            out_dir: out_dir.into(),
        }
    }
}

const WORDS: &[&str] = &[
    "account", "secure", "service", "customer", "online", "banking", "payment", "transfer",
    "statement", "support", "privacy", "policy", "terms", "conditions", "overview", "profile",
    "settings", "notification", "message", "center", "alert", "shipment", "delivery", "tracking",
    "invoice", "receipt", "balance", "credit", "debit", "mortgage", "savings", "investment",
    "portfolio", "rewards", "benefits", "enterprise", "solutions", "partner", "developer",
    "documentation", "careers", "press", "legal", "accessibility", "international", "community",
    "security", "verification", "identity", "session", "dashboard", "activity", "history",
    "report", "summary", "contact", "branch", "locator", "currency", "exchange", "global",
];

const CSS_PROPS: &[&str] = &[
    "margin: 0 auto", "padding: 12px 24px", "color: #1a1a2e", "background: #f4f6fb",
    "font-family: 'Segoe UI', Arial, sans-serif", "border-radius: 6px", "display: flex",
    "justify-content: space-between", "align-items: center", "max-width: 1180px",
    "box-shadow: 0 1px 4px rgba(0,0,0,0.08)", "text-decoration: none", "font-weight: 600",
    "line-height: 1.6", "letter-spacing: 0.02em", "border: 1px solid #d8dde6",
];

const TLDS: &[&str] = &["com", "net", "org", "io", "co.uk"];

fn slug(text: &str) -> String {
    text.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

fn sentence(rng: &mut Rng, words: usize) -> String {
    let mut out = String::new();
    for i in 0..words {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(rng.pick(WORDS));
    }
    out
}

/// Generate one page. Deterministic for the 4-tuple.
pub fn gen_page(label: Label, category: &str, index: usize, seed: u64) -> Vec<u8> {
    let tag = fnv1a(category.as_bytes())
        ^ (index as u64).wrapping_mul(0x2545_f491_4f6c_dd1d)
        ^ match label {
            Label::Legitimate => 0x5555_5555_5555_5555,
            Label::Phishing => 0xaaaa_aaaa_aaaa_aaaa,
        };
    let mut rng = Rng::new(seed).derive(tag);
    let brand = category
        .trim_end_matches(" Phish")
        .trim_end_matches(" Legitimate")
        .to_string();
    match label {
        Label::Legitimate => gen_legitimate(&mut rng, &brand),
        Label::Phishing => gen_phishing(&mut rng, &brand),
    }
}

fn gen_legitimate(rng: &mut Rng, brand: &str) -> Vec<u8> {
    let target = rng.range(20 * 1024, 196 * 1024);
    let domain = format!("{}.{}", slug(brand), rng.pick(TLDS));
    let mut page = String::with_capacity(target + 2048);

    page.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n");
    page.push_str("<meta charset=\"utf-8\">\n");
    page.push_str("<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n");
    let _ = writeln!(page, "<title>{brand} \u{2014} Secure Online Services</title>");
    let _ = writeln!(
        page,
        "<!--\n  Copyright \u{00a9} {} {brand} Holdings plc. All rights reserved.\n  \
         Licensed under the {brand} Web Platform Agreement. Unauthorised\n  \
         reproduction of this page or its assets is prohibited. \u{2122}\n-->",
        2010 + rng.below(16)
    );
    let _ = writeln!(
        page,
        "<link rel=\"canonical\" href=\"https://www.{domain}/\">"
    );

    let mut section = 0usize;
    while page.len() < target {
        match section % 6 {
            0 => {
                // style block
                page.push_str("<style>\n");
                for _ in 0..rng.range(4, 12) {
                    let _ = writeln!(
                        page,
                        ".{}-{} {{ {}; {}; {} }}",
                        rng.pick(WORDS),
                        rng.pick(WORDS),
                        rng.pick(CSS_PROPS),
                        rng.pick(CSS_PROPS),
                        rng.pick(CSS_PROPS)
                    );
                }
                page.push_str("</style>\n");
                if section == 0 {
                    page.push_str("</head>\n<body>\n<nav class=\"site-nav\">\n");
                }
            }
            1 => {
                // navigation links
                for _ in 0..rng.range(8, 30) {
                    let _ = writeln!(
                        page,
                        "<a href=\"https://www.{domain}/{}/{}\">{}</a>",
                        rng.pick(WORDS),
                        rng.pick(WORDS),
                        sentence(rng, 2)
                    );
                }
                if section == 1 {
                    page.push_str("</nav>\n<main>\n");
                }
            }
            2 => {
                // prose
                let _ = writeln!(page, "<section>\n<h2>{}</h2>", sentence(rng, 3));
                for _ in 0..rng.range(2, 6) {
                    let n = rng.range(20, 60);
                    let _ = writeln!(page, "<p>{}.</p>", sentence(rng, n));
                }
                page.push_str("</section>\n");
            }
            3 => {
                // detailed data-entry form
                let _ = writeln!(
                    page,
                    "<form action=\"https://www.{domain}/{}\" method=\"post\">",
                    rng.pick(WORDS)
                );
                for _ in 0..rng.range(4, 10) {
                    let field = format!("{}_{}", rng.pick(WORDS), rng.pick(WORDS));
                    let _ = writeln!(
                        page,
                        "<label for=\"{field}\">{}</label>\n\
                         <input type=\"text\" id=\"{field}\" name=\"{field}\" autocomplete=\"off\">",
                        sentence(rng, 2)
                    );
                }
                page.push_str("<button type=\"submit\">Continue</button>\n</form>\n");
            }
            4 => {
                // inline script
                page.push_str("<script>\n(function () {\n  'use strict';\n");
                for _ in 0..rng.range(3, 9) {
                    let _ = writeln!(
                        page,
                        "  var {} = document.querySelectorAll('.{}-{}').length;",
                        rng.pick(WORDS),
                        rng.pick(WORDS),
                        rng.pick(WORDS)
                    );
                }
                let _ = writeln!(
                    page,
                    "  window.__{}Telemetry = {{ build: {}, csp: true }};",
                    slug(brand),
                    rng.below(100_000)
                );
                page.push_str("})();\n</script>\n");
            }
            _ => {
                // long license / legal comment
                let n = rng.range(40, 120);
                let _ = writeln!(page, "<!-- {} -->", sentence(rng, n));
            }
        }
        section += 1;
    }

    page.push_str("</main>\n<footer>\n");
    let _ = writeln!(
        page,
        "<p>\u{00a9} {brand} \u{2014} regulated entity. {}.</p>",
        sentence(rng, 12)
    );
    page.push_str("</footer>\n</body>\n</html>\n");
    page.into_bytes()
}

fn gen_phishing(rng: &mut Rng, brand: &str) -> Vec<u8> {
    let target = rng.range(1024, 10 * 1024 - 512);
    let lookalike = format!(
        "{}-{}.{}",
        slug(brand),
        rng.pick(&["secure", "verify", "login", "account", "update"]),
        rng.pick(TLDS)
    );
    let mut page = String::with_capacity(target + 512);

    page.push_str("<!DOCTYPE html>\n<html>\n<head>\n");
    let _ = writeln!(page, "<title>{brand} Login</title>");
    page.push_str("<meta charset=\"utf-8\">\n</head>\n<body>\n");
    let _ = writeln!(
        page,
        "<img src=\"logo.png\" alt=\"{brand}\" width=\"{}\">",
        rng.range(120, 360)
    );
    let _ = writeln!(
        page,
        "<h1>{} your {brand} account</h1>",
        rng.pick(&["Verify", "Confirm", "Unlock", "Restore"])
    );
    let _ = writeln!(
        page,
        "<form action=\"http://{lookalike}/{}.php\" method=\"post\">",
        rng.pick(&["gate", "submit", "auth", "next"])
    );
    page.push_str(
        "<input type=\"text\" name=\"user\" placeholder=\"Email or ID\">\n\
         <input type=\"password\" name=\"pass\" placeholder=\"Password\">\n\
         <button type=\"submit\">Sign in</button>\n</form>\n",
    );

    while page.len() < target {
        let n = rng.range(6, 18);
        let _ = writeln!(page, "<p>{}.</p>", sentence(rng, n));
        if rng.below(4) == 0 {
            let _ = writeln!(page, "<img src=\"asset{}.jpg\" alt=\"\">", rng.below(10));
        }
    }
    page.push_str("</body>\n</html>\n");
    page.into_bytes()
}

/// Render every page of the corpus to PNG, write a manifest with a seeded
/// stratified 80/20 train/test split, and return the manifest path.
pub fn build_corpus(cfg: &CorpusConfig) -> Result<PathBuf> {
    if cfg.per_category == 0 {
        return Err(Error::BadShape("per_category must be >= 1".to_string()));
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::StoreWriteFailed(e.to_string()))?;
    let manifest_path = cfg.out_dir.join("manifest.jsonl");
    if manifest_path.exists() {
        std::fs::remove_file(&manifest_path).map_err(|e| Error::StoreWriteFailed(e.to_string()))?;
    }

    let order = CurveOrder::order7();
    let split_root = Rng::new(cfg.seed);
    for (category, label) in &cfg.categories {
        let cat_slug = slug(category);
        let dir = cfg
            .out_dir
            .join("images")
            .join(label.as_str())
            .join(&cat_slug);
        std::fs::create_dir_all(&dir).map_err(|e| Error::StoreWriteFailed(e.to_string()))?;

        // split depends only on (seed, category): shuffle indices, first
        // fifth is the test set
        let mut split_rng = split_root.derive(fnv1a(category.as_bytes()));
        let mut indices: Vec<usize> = (0..cfg.per_category).collect();
        split_rng.shuffle(&mut indices);
        let n_test = cfg.per_category / 5;
        let mut split_of = vec![Split::Train; cfg.per_category];
        for &i in indices.iter().take(n_test) {
            split_of[i] = Split::Test;
        }

        for (index, &split) in split_of.iter().enumerate() {
            let html = gen_page(*label, category, index, cfg.seed);
            let image = render(&html, order)?;
            let png = encode_png(&image);
            let rel = format!(
                "images/{}/{}/{:04}.png",
                label.as_str(),
                cat_slug,
                index
            );
            std::fs::write(cfg.out_dir.join(&rel), &png)
                .map_err(|e| Error::StoreWriteFailed(e.to_string()))?;
            let sample = Sample {
                path: rel,
                label: *label,
                category: category.clone(),
                source_url: None,
                digest: content_digest(&png),
                split: Some(split),
            };
            append_manifest(&manifest_path, &sample)?;
        }
    }
    Ok(manifest_path)
}

/// Digest of the manifest file itself; rebuild-identity checks hang off this.
pub fn manifest_digest(path: &Path) -> Result<String> {
    Ok(content_digest(&std::fs::read(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pages_are_deterministic_for_the_4_tuple() {
        let a = gen_page(Label::Phishing, "PayPal Phish", 3, 42);
        let b = gen_page(Label::Phishing, "PayPal Phish", 3, 42);
        assert_eq!(a, b);
        let c = gen_page(Label::Phishing, "PayPal Phish", 4, 42);
        assert_ne!(a, c);
        let d = gen_page(Label::Phishing, "PayPal Phish", 3, 43);
        assert_ne!(a, d);
    }

    #[test]
    fn size_ranges_do_not_overlap() {
        for index in 0..30 {
            let legit = gen_page(Label::Legitimate, "PayPal Legitimate", index, 1);
            let phish = gen_page(Label::Phishing, "PayPal Phish", index, 1);
            assert!(legit.len() >= 20 * 1024, "legit page only {} bytes", legit.len());
            assert!(legit.len() <= 202 * 1024);
            assert!(phish.len() >= 1024);
            assert!(phish.len() <= 10 * 1024, "phish page {} bytes", phish.len());
        }
    }

    #[test]
    fn pages_have_matched_top_level_tags() {
        for (label, category) in [
            (Label::Legitimate, "ABSA Legitimate"),
            (Label::Phishing, "ABSA Phish"),
        ] {
            let page = String::from_utf8(gen_page(label, category, 0, 9)).unwrap();
            assert_eq!(page.matches("<html").count(), 1, "{category}");
            assert_eq!(page.matches("</html>").count(), 1);
            assert_eq!(page.matches("<body").count(), 1);
            assert_eq!(page.matches("</body>").count(), 1);
        }
    }

    #[test]
    fn phishing_pages_have_exactly_one_form() {
        for index in 0..10 {
            let page = String::from_utf8(gen_page(Label::Phishing, "DHL Tracking Phish", index, 5))
                .unwrap();
            assert_eq!(page.matches("<form").count(), 1);
            assert!(page.contains("type=\"password\""));
        }
    }

    #[test]
    fn small_corpus_builds_with_split_tags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = CorpusConfig {
            per_category: 5,
            categories: vec![
                ("Tiny Phish".to_string(), Label::Phishing),
                ("Tiny Legitimate".to_string(), Label::Legitimate),
            ],
            seed: 7,
            out_dir: dir.path().to_path_buf(),
        };
        let manifest = build_corpus(&cfg).unwrap();
        let samples = crate::store::load_manifest(&manifest).unwrap();
        assert_eq!(samples.len(), 10);
        let tests = samples
            .iter()
            .filter(|s| s.split == Some(Split::Test))
            .count();
        assert_eq!(tests, 2); // 5/5 per category -> one test sample each
        for sample in &samples {
            let bytes = std::fs::read(dir.path().join(&sample.path)).unwrap();
            assert_eq!(content_digest(&bytes), sample.digest);
        }
    }

    #[test]
    fn rebuild_with_same_seed_is_bit_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mk = |out: &Path| CorpusConfig {
            per_category: 3,
            categories: vec![
                ("R Phish".to_string(), Label::Phishing),
                ("R Legitimate".to_string(), Label::Legitimate),
            ],
            seed: 99,
            out_dir: out.to_path_buf(),
        };
        let m_a = build_corpus(&mk(dir_a.path())).unwrap();
        let m_b = build_corpus(&mk(dir_b.path())).unwrap();
        assert_eq!(
            manifest_digest(&m_a).unwrap(),
            manifest_digest(&m_b).unwrap()
        );
    }

    #[test]
    fn two_categories_times_two_gives_four_lines() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = CorpusConfig {
            per_category: 2,
            categories: vec![
                ("A Phish".to_string(), Label::Phishing),
                ("A Legitimate".to_string(), Label::Legitimate),
            ],
            seed: 1,
            out_dir: dir.path().to_path_buf(),
        };
        let manifest = build_corpus(&cfg).unwrap();
        assert_eq!(crate::store::load_manifest(&manifest).unwrap().len(), 4);
    }
}
