//! Runs the model-server conformance suite.
//!
//! With a URL argument it checks that server; without one it starts an
//! in-process mock server and checks that instead.

use std::sync::Arc;

use xbarrier::conformance::run_conformance;
use xbarrier::evalharness::{handle_wire_request, Knowledge, MockModel, MockModelSpec};

fn local_server() -> String {
    let server = tiny_http::Server::http("127.0.0.1:0").expect("bind");
    let port = server.server_addr().to_ip().unwrap().port();
    let model = MockModel::new(MockModelSpec::BowEmbed, Arc::new(Knowledge::default()));
    std::thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let mut body = String::new();
            let _ = req.as_reader().read_to_string(&mut body);
            let (status, text) = handle_wire_request(&model, req.method().as_str(), req.url(), &body);
            let _ = req.respond(tiny_http::Response::from_string(text).with_status_code(status));
        }
    });
    format!("http://127.0.0.1:{port}")
}

fn main() {
    let url = std::env::args().nth(1).unwrap_or_else(local_server);
    let report = run_conformance(&url);
    for c in &report.checks {
        println!("{} {:<26} {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    if !report.passed() {
        std::process::exit(1);
    }
}
