//! URL normalization and guarded HTTP scraping.
//!
//! Pages are retrieved as raw bytes with a single GET chain: no script
//! execution, no subresource fetches, no rendering. The user never has to
//! visit a suspect page for it to be analyzed. Oversize bodies are rejected
//! outright rather than truncated, since a clipped page would visualize
//! differently from run to run depending on network chunking.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::{Error, Result};

/// A parsed, canonicalized http(s) URL: lowercase scheme and host, fragment
/// removed, default ports dropped, path and query preserved.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NormalizedUrl(Url);

impl NormalizedUrl {
    pub fn as_str(&self) -> &str {
        self.0.as_str()
    }

    pub fn scheme(&self) -> &str {
        self.0.scheme()
    }

    pub fn host(&self) -> &str {
        self.0.host_str().unwrap_or_default()
    }
}

impl std::fmt::Display for NormalizedUrl {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl TryFrom<String> for NormalizedUrl {
    type Error = Error;

    fn try_from(value: String) -> Result<NormalizedUrl> {
        normalize_url(&value)
    }
}

impl From<NormalizedUrl> for String {
    fn from(url: NormalizedUrl) -> String {
        url.0.into()
    }
}

/// Normalize a raw URL string.
pub fn normalize_url(raw: &str) -> Result<NormalizedUrl> {
    let mut url = Url::parse(raw).map_err(|_| Error::InvalidUrl(raw.to_string()))?;
    match url.scheme() {
        "http" | "https" => {}
        other => return Err(Error::UnsupportedScheme(other.to_string())),
    }
    if url.host_str().is_none_or(|h| h.is_empty()) {
        return Err(Error::InvalidUrl(raw.to_string()));
    }
    url.set_fragment(None);
    Ok(NormalizedUrl(url))
}

/// Limits applied to every fetch. All limits are strictly positive.
#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub timeout: Duration,
    pub max_redirects: u32,
    pub max_body_bytes: u64,
    pub user_agent: String,
    /// TLS certificate validation; may be disabled for lab setups.
    pub verify_tls: bool,
}

impl Default for FetchConfig {
    fn default() -> FetchConfig {
        FetchConfig {
            timeout: Duration::from_secs(10),
            max_redirects: 5,
            max_body_bytes: 5 * 1024 * 1024,
            user_agent: "phishvis/1.0".to_string(),
            verify_tls: true,
        }
    }
}

/// A successfully scraped page.
#[derive(Debug, Clone)]
pub struct PageContent {
    /// Raw body bytes, exactly as served.
    pub body: Vec<u8>,
    /// Final status code, always 2xx.
    pub status: u16,
    /// RFC 3339 UTC timestamp of the fetch.
    pub fetched_at: String,
    /// URL after following redirects.
    pub final_url: NormalizedUrl,
}

/// Fetch the raw bytes of a page with the configured limits.
pub fn fetch(url: &NormalizedUrl, cfg: &FetchConfig) -> Result<PageContent> {
    use ureq::tls::TlsConfig;
    use ureq::ResponseExt;

    let agent: ureq::Agent = ureq::config::Config::builder()
        .http_status_as_error(false)
        .max_redirects(cfg.max_redirects)
        .max_redirects_will_error(true)
        .save_redirect_history(true)
        .timeout_global(Some(cfg.timeout))
        .user_agent(cfg.user_agent.as_str())
        .tls_config(
            TlsConfig::builder()
                .disable_verification(!cfg.verify_tls)
                .build(),
        )
        .build()
        .into();

    let mut response = agent
        .get(url.as_str())
        .call()
        .map_err(|e| map_ureq_error(e, url))?;

    let status = response.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(Error::HttpStatus(status));
    }

    let final_url = normalize_url(&response.get_uri().to_string())?;
    let fetched_at = now_rfc3339();

    let body = response
        .body_mut()
        .with_config()
        // one extra byte so an exactly-at-cap body is not misreported
        .limit(cfg.max_body_bytes + 1)
        .read_to_vec()
        .map_err(|e| map_ureq_error(e, url))?;
    if body.len() as u64 > cfg.max_body_bytes {
        return Err(Error::BodyTooLarge {
            limit: cfg.max_body_bytes,
        });
    }

    Ok(PageContent {
        body,
        status,
        fetched_at,
        final_url,
    })
}

pub(crate) fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn map_ureq_error(err: ureq::Error, url: &NormalizedUrl) -> Error {
    match err {
        ureq::Error::HostNotFound => Error::NameResolution(url.host().to_string()),
        ureq::Error::Timeout(_) => Error::Timeout,
        ureq::Error::TooManyRedirects => Error::TooManyRedirects,
        ureq::Error::StatusCode(code) => Error::HttpStatus(code),
        ureq::Error::BodyExceedsLimit(limit) => Error::BodyTooLarge { limit: limit - 1 },
        ureq::Error::Io(io_err) => {
            // std's resolver surfaces DNS failures as opaque io errors
            let text = io_err.to_string();
            if text.contains("failed to lookup address") || text.contains("Name or service") {
                Error::NameResolution(url.host().to_string())
            } else if io_err.kind() == std::io::ErrorKind::TimedOut {
                Error::Timeout
            } else {
                Error::Transport(text)
            }
        }
        other => Error::Transport(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_lowercases_and_strips() {
        let url = normalize_url("HTTP://Example.COM:80/a#frag").unwrap();
        assert_eq!(url.as_str(), "http://example.com/a");
    }

    #[test]
    fn already_normal_urls_pass_through() {
        let url = normalize_url("https://x.org/p?q=1").unwrap();
        assert_eq!(url.as_str(), "https://x.org/p?q=1");
    }

    #[test]
    fn default_https_port_is_dropped() {
        let url = normalize_url("https://x.org:443/p").unwrap();
        assert_eq!(url.as_str(), "https://x.org/p");
        let kept = normalize_url("https://x.org:8443/p").unwrap();
        assert_eq!(kept.as_str(), "https://x.org:8443/p");
    }

    #[test]
    fn non_http_schemes_are_rejected() {
        assert!(matches!(
            normalize_url("ftp://x.org/"),
            Err(Error::UnsupportedScheme(s)) if s == "ftp"
        ));
        assert!(matches!(
            normalize_url("file:///etc/passwd"),
            Err(Error::UnsupportedScheme(_))
        ));
    }

    #[test]
    fn garbage_is_invalid() {
        assert!(matches!(
            normalize_url("not a url"),
            Err(Error::InvalidUrl(_))
        ));
        assert!(matches!(normalize_url(""), Err(Error::InvalidUrl(_))));
    }

    #[test]
    fn normalization_is_idempotent() {
        for raw in [
            "HTTP://Example.COM:80/a#frag",
            "https://x.org/p?q=1",
            "http://mixed.Case.Host/Path/IS/Preserved?Q=Mixed",
        ] {
            let once = normalize_url(raw).unwrap();
            let twice = normalize_url(once.as_str()).unwrap();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn serde_round_trip_keeps_canonical_form() {
        let url = normalize_url("HTTP://A.B:80/x").unwrap();
        let json = serde_json::to_string(&url).unwrap();
        assert_eq!(json, "\"http://a.b/x\"");
        let back: NormalizedUrl = serde_json::from_str(&json).unwrap();
        assert_eq!(back, url);
    }

    #[test]
    fn default_config_limits_are_positive() {
        let cfg = FetchConfig::default();
        assert!(cfg.timeout > Duration::ZERO);
        assert!(cfg.max_redirects > 0);
        assert!(cfg.max_body_bytes > 0);
        assert_eq!(cfg.user_agent, "phishvis/1.0");
        assert!(cfg.verify_tls);
    }

    proptest::proptest! {
        #[test]
        fn normalize_never_panics_and_is_idempotent(raw in "\\PC*") {
            if let Ok(url) = normalize_url(&raw) {
                let twice = normalize_url(url.as_str()).unwrap();
                proptest::prop_assert_eq!(url, twice);
            }
        }
    }
}
