use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use xbarrier::conformance::run_conformance;
use xbarrier::datamodel::LanguageTag;
use xbarrier::evalharness::{
    handle_wire_request, EmbedRequest, HttpModelClient, Knowledge, MockModel, MockModelSpec, ModelClient,
    ModelError, ModelRequest,
};
use xbarrier::http::{HttpConfig, RetryPolicy};
use xbarrier::translate::{BackendSpec, HttpBackend, TranslateError, TranslationBackend, TranslationCache, Translator};

struct Seen {
    method: String,
    path: String,
    auth: Option<String>,
    body: String,
}

type Handler = dyn Fn(usize, &Seen) -> (u16, String) + Send + Sync;

/// Serves `handler` on an ephemeral port; the handler gets the 0-based
/// request number. Returns the base URL, a hit counter and the request log.
fn serve(handler: Box<Handler>) -> (String, Arc<AtomicUsize>, Arc<Mutex<Vec<Seen>>>) {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let port = server.server_addr().to_ip().unwrap().port();
    let hits = Arc::new(AtomicUsize::new(0));
    let log = Arc::new(Mutex::new(Vec::new()));
    let (h, l) = (hits.clone(), log.clone());
    std::thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let mut body = String::new();
            let _ = req.as_reader().read_to_string(&mut body);
            let seen = Seen {
                method: req.method().to_string(),
                path: req.url().to_string(),
                auth: req
                    .headers()
                    .iter()
                    .find(|x| x.field.equiv("Authorization"))
                    .map(|x| x.value.to_string()),
                body,
            };
            let n = h.fetch_add(1, Ordering::SeqCst);
            let (status, text) = handler(n, &seen);
            l.lock().unwrap().push(seen);
            let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
            let _ = req.respond(tiny_http::Response::from_string(text).with_status_code(status).with_header(header));
        }
    });
    (format!("http://127.0.0.1:{port}"), hits, log)
}

fn fast(url: &str) -> HttpConfig {
    let mut c = HttpConfig::new(url);
    c.retry = RetryPolicy {
        max_attempts: 3,
        backoff_base_ms: 1,
        backoff_ceiling_ms: 2,
    };
    c
}

fn lang(s: &str) -> LanguageTag {
    LanguageTag::parse(s).unwrap()
}

#[test]
fn translation_retries_server_errors() {
    let (url, hits, log) = serve(Box::new(|n, _| {
        if n < 2 {
            (503, "busy".into())
        } else {
            (200, r#"{"text":"bonjour"}"#.into())
        }
    }));
    let b = HttpBackend::new(fast(&url));
    assert_eq!(b.translate_text("hello", &lang("en"), &lang("fr")).unwrap(), "bonjour");
    assert_eq!(hits.load(Ordering::SeqCst), 3);
    let log = log.lock().unwrap();
    assert_eq!(log[0].method, "POST");
    assert_eq!(log[0].path, "/v1/translate");
    let body: serde_json::Value = serde_json::from_str(&log[0].body).unwrap();
    assert_eq!(body, serde_json::json!({"text": "hello", "source": "en", "target": "fr"}));
}

#[test]
fn translation_client_errors_are_not_retried() {
    let (url, hits, _) = serve(Box::new(|_, _| (422, "bad language".into())));
    let b = HttpBackend::new(fast(&url));
    let e = b.translate_text("hello", &lang("en"), &lang("fr")).unwrap_err();
    assert!(matches!(e, TranslateError::BackendRejection { status: 422, .. }), "{e:?}");
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn exhausted_retries_report_last_failure() {
    let (url, hits, _) = serve(Box::new(|_, _| (500, "down".into())));
    let b = HttpBackend::new(fast(&url));
    let e = b.translate_text("hello", &lang("en"), &lang("de")).unwrap_err();
    assert!(e.is_backend_failure());
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn bearer_token_comes_from_the_named_variable() {
    let (url, _, log) = serve(Box::new(|_, _| (200, r#"{"text":"hallo"}"#.into())));
    let mut cfg = fast(&url);
    cfg.auth_env_var = Some("XBARRIER_TEST_TOKEN_PRESENT".into());
    std::env::set_var("XBARRIER_TEST_TOKEN_PRESENT", "s3cret");
    HttpBackend::new(cfg).translate_text("hello", &lang("en"), &lang("de")).unwrap();
    assert_eq!(log.lock().unwrap()[0].auth.as_deref(), Some("Bearer s3cret"));

    let mut cfg = fast(&url);
    cfg.auth_env_var = Some("XBARRIER_TEST_TOKEN_ABSENT".into());
    let e = HttpBackend::new(cfg).translate_text("hello", &lang("en"), &lang("de")).unwrap_err();
    assert!(e.to_string().contains("XBARRIER_TEST_TOKEN_ABSENT"), "{e}");
}

#[test]
fn cached_translations_skip_the_backend() {
    let (url, hits, _) = serve(Box::new(|_, s| {
        let v: serde_json::Value = serde_json::from_str(&s.body).unwrap();
        (200, serde_json::json!({ "text": format!("<{}>", v["text"].as_str().unwrap()) }).to_string())
    }));
    let spec = BackendSpec::http(fast(&url));
    let tr = Translator::from_spec(&spec, Arc::new(TranslationCache::in_memory())).unwrap();
    for _ in 0..3 {
        assert_eq!(tr.translate_text("owl", &lang("en"), &lang("it")).unwrap(), "<owl>");
    }
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

fn mock_server(spec: MockModelSpec) -> String {
    let model = MockModel::new(spec, Arc::new(Knowledge::default()));
    serve(Box::new(move |_, s| handle_wire_request(&model, &s.method, &s.path, &s.body))).0
}

#[test]
fn model_client_round_trips_through_the_wire() {
    let local = MockModel::new(MockModelSpec::Echo, Arc::new(Knowledge::default()));
    let client = HttpModelClient::new(fast(&mock_server(MockModelSpec::Echo)));
    client.health().unwrap();
    let req = ModelRequest::greedy("Question: two plus two?\nAnswer:", 4)
        .with_targets(vec!["A".into(), "B".into(), "C".into(), "D".into()]);
    assert_eq!(client.complete(&req).unwrap(), local.complete(&req).unwrap());

    let bow = HttpModelClient::new(fast(&mock_server(MockModelSpec::BowEmbed)));
    let local = MockModel::new(MockModelSpec::BowEmbed, Arc::new(Knowledge::default()));
    let e = EmbedRequest::new("the river flows", Some(vec![false, true, false]));
    assert_eq!(bow.embed(&e).unwrap(), local.embed(&e).unwrap());
}

#[test]
fn model_client_surfaces_rejections() {
    let client = HttpModelClient::new(fast(&mock_server(MockModelSpec::BowEmbed)));
    // Client-side validation catches bad masks before anything is sent.
    let e = client.embed(&EmbedRequest::new("two words", Some(vec![true, true]))).unwrap_err();
    assert!(matches!(e, ModelError::InvalidRequest(_)), "{e:?}");
    let e = client.embed(&EmbedRequest::new("two words", Some(vec![false]))).unwrap_err();
    assert!(matches!(e, ModelError::InvalidRequest(_)), "{e:?}");
}

#[test]
fn mock_servers_pass_conformance() {
    for spec in [MockModelSpec::Echo, MockModelSpec::HashEmbed, MockModelSpec::BowEmbed] {
        let url = mock_server(spec);
        let report = run_conformance(&url);
        assert!(report.passed(), "{spec}: {:#?}", report.checks);
        assert_eq!(report.checks.len(), 9);
    }
}

#[test]
fn conformance_flags_broken_servers() {
    let (url, _, _) = serve(Box::new(|n, s| match (s.method.as_str(), s.path.as_str()) {
        ("GET", "/v1/health") => (200, "{}".into()),
        ("POST", "/v1/complete") => (
            200,
            serde_json::json!({
                "text": format!("reply {n}"),
                "target_logprobs": {"A": -0.1, "B": -0.1, "C": -0.1, "D": -0.1}
            })
            .to_string(),
        ),
        ("POST", "/v1/embed") => (200, format!("{{\"embedding\":[{n}.0, 1.0]}}")),
        _ => (404, "{}".into()),
    }));
    let report = run_conformance(&url);
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    for name in ["temperature0_determinism", "logprob_mass", "embed_identical_texts", "full_mask_rejected", "malformed_rejected"] {
        assert!(failed.contains(&name), "{name} should fail: {failed:?}");
    }
    assert!(!failed.contains(&"health"));
    assert!(!failed.contains(&"complete_schema"));
}
