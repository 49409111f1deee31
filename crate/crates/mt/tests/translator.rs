use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use amcg_mt::{
    mock_translate, HttpConfig, HttpProvider, MockProvider, MockRuleSet, MtError, Provider,
    RequestStyle, TranslationCache, TranslationRequest, Translator,
};

fn word_rules() -> MockRuleSet {
    MockRuleSet::from_json(r#"{"word_map": {"good": "acha", "is": ""}}"#).unwrap()
}

#[test]
fn mock_translation_through_cache() {
    let t = Translator::new(
        TranslationCache::in_memory(),
        Box::new(MockProvider::new(word_rules()).unwrap()),
    );
    let req = TranslationRequest::new(["A is good", "B is good", "A is good"], "en", "hi").unwrap();
    assert_eq!(
        t.translate(&req).unwrap(),
        vec!["A acha", "B acha", "A acha"]
    );
    assert_eq!(t.provider_calls(), 1);
    assert_eq!(t.cache().len(), 2);
    // second pass is served entirely from the cache
    t.translate(&req).unwrap();
    assert_eq!(t.provider_calls(), 1);
}

#[test]
fn cache_only_hits_and_misses() {
    let cache = TranslationCache::in_memory();
    cache.insert("en", "hi", "x", "y").unwrap();
    let t = Translator::cache_only(cache);
    let hit = TranslationRequest::new(["x"], "en", "hi").unwrap();
    assert_eq!(t.translate(&hit).unwrap(), vec!["y"]);
    let miss = TranslationRequest::new(["x", "z"], "en", "hi").unwrap();
    match t.translate(&miss) {
        Err(MtError::CacheMiss { text, .. }) => assert_eq!(text, "z"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn mock_is_batch_independent() {
    let rules = MockRuleSet {
        noise_rate: 0.5,
        seed: 11,
        ..word_rules()
    };
    let texts: Vec<String> = (0..40).map(|i| format!("item {i} is good")).collect();
    let p = MockProvider::new(rules.clone()).unwrap();
    let whole = p.translate_batch(&texts, "en", "hi").unwrap();
    for (i, t) in texts.iter().enumerate() {
        assert_eq!(whole[i], mock_translate(&rules, t));
    }
}

struct Slow {
    calls: Arc<AtomicUsize>,
    batch: usize,
}

impl Provider for Slow {
    fn name(&self) -> &str {
        "slow"
    }
    fn max_batch(&self) -> usize {
        self.batch
    }
    fn concurrency(&self) -> usize {
        4
    }
    fn translate_batch(&self, texts: &[String], _: &str, _: &str) -> Result<Vec<String>, MtError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        std::thread::sleep(Duration::from_millis(50));
        Ok(texts.iter().map(|t| t.to_uppercase()).collect())
    }
}

#[test]
fn concurrent_requests_share_one_call() {
    let calls = Arc::new(AtomicUsize::new(0));
    let t = Arc::new(Translator::new(
        TranslationCache::in_memory(),
        Box::new(Slow {
            calls: calls.clone(),
            batch: 100,
        }),
    ));
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let t = t.clone();
            std::thread::spawn(move || {
                t.translate(&TranslationRequest::new(["same text"], "en", "hi").unwrap())
                    .unwrap()
            })
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), vec!["SAME TEXT"]);
    }
    assert_eq!(calls.load(Ordering::SeqCst), 1);
}

#[test]
fn batches_preserve_order() {
    let calls = Arc::new(AtomicUsize::new(0));
    let t = Translator::new(
        TranslationCache::in_memory(),
        Box::new(Slow {
            calls: calls.clone(),
            batch: 7,
        }),
    );
    let texts: Vec<String> = (0..50).map(|i| format!("t{i}")).collect();
    let out = t
        .translate(&TranslationRequest::new(texts.clone(), "en", "hi").unwrap())
        .unwrap();
    assert_eq!(
        out,
        texts.iter().map(|s| s.to_uppercase()).collect::<Vec<_>>()
    );
    assert_eq!(calls.load(Ordering::SeqCst), 8);
}

#[test]
fn persisted_cache_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mt.jsonl");
    let req = TranslationRequest::new(["A is good"], "en", "hi").unwrap();
    {
        let t = Translator::new(
            TranslationCache::open(&path).unwrap(),
            Box::new(MockProvider::new(word_rules()).unwrap()),
        );
        t.translate(&req).unwrap();
    }
    let t = Translator::cache_only(TranslationCache::open(&path).unwrap());
    assert_eq!(t.translate(&req).unwrap(), vec!["A acha"]);
}

/// Minimal HTTP/1.1 server answering with scripted (status, body) pairs and
/// recording request bodies.
fn stub(script: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/translate", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for (status, body) in script {
            let Ok((mut stream, _)) = listener.accept() else {
                return;
            };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut head = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head += &line;
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock()
                .unwrap()
                .push(format!("{head}\n{}", String::from_utf8(buf).unwrap()));
            let resp = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
        }
    });
    (url, seen)
}

fn http_cfg(url: String) -> HttpConfig {
    HttpConfig {
        endpoint: url,
        api_key: Some("secret".into()),
        backoff_ms: 1,
        concurrency: 1,
        ..Default::default()
    }
}

#[test]
fn http_retries_transient_failures() {
    let ok = r#"[{"translations":[{"text":"namaste"}]}]"#.to_string();
    let (url, seen) = stub(vec![(503, "{}".into()), (429, "{}".into()), (200, ok)]);
    let t = Translator::new(
        TranslationCache::in_memory(),
        Box::new(HttpProvider::new(http_cfg(url)).unwrap()),
    );
    let out = t
        .translate(&TranslationRequest::new(["hello"], "en", "hi").unwrap())
        .unwrap();
    assert_eq!(out, vec!["namaste"]);
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert!(seen[2]
        .to_ascii_lowercase()
        .contains("ocp-apim-subscription-key: secret"));
    assert!(seen[2].contains(r#"[{"Text":"hello"}]"#));
    assert!(seen[2].contains("from=en") && seen[2].contains("to=hi"));
}

#[test]
fn http_gives_up_after_three_attempts() {
    let (url, seen) = stub(vec![
        (500, "{}".into()),
        (500, "{}".into()),
        (500, "{}".into()),
    ]);
    let t = Translator::new(
        TranslationCache::in_memory(),
        Box::new(HttpProvider::new(http_cfg(url)).unwrap()),
    );
    let err = t
        .translate(&TranslationRequest::new(["hello"], "en", "hi").unwrap())
        .unwrap_err();
    assert!(matches!(err, MtError::ProviderUnavailable(_)), "{err}");
    assert_eq!(seen.lock().unwrap().len(), 3);
    assert!(t.cache().is_empty());
}

#[test]
fn http_auth_failure_is_not_retried() {
    let (url, seen) = stub(vec![(401, "{}".into())]);
    let p = HttpProvider::new(http_cfg(url)).unwrap();
    let err = p.translate_batch(&["x".into()], "en", "hi").unwrap_err();
    assert!(matches!(err, MtError::AuthError(_)));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn http_generic_style_with_custom_header() {
    let (url, seen) = stub(vec![(200, r#"{"result":{"texts":["a!","b!"]}}"#.into())]);
    let cfg = HttpConfig {
        api_key_header: "X-Api-Key".into(),
        style: RequestStyle::Generic {
            texts_field: "q".into(),
            response_pointer: "/result/texts".into(),
        },
        ..http_cfg(url)
    };
    let p = HttpProvider::new(cfg).unwrap();
    let out = p
        .translate_batch(&["a".into(), "b".into()], "en", "gu")
        .unwrap();
    assert_eq!(out, vec!["a!", "b!"]);
    let seen = seen.lock().unwrap();
    assert!(seen[0].to_ascii_lowercase().contains("x-api-key: secret"));
    assert!(seen[0].contains(r#""q":["a","b"]"#));
}
