//! Serves a mock model over the model wire protocol.
//!
//! `cargo run --example serve_mock_model -- [mock:SPEC] [ADDR]`, then point
//! `xbarrier eval --model http://ADDR` or the conformance example at it.

use std::sync::Arc;

use xbarrier::evalharness::{handle_wire_request, Knowledge, MockModel, MockModelSpec};

fn main() {
    let mut args = std::env::args().skip(1);
    let spec: MockModelSpec = args.next().as_deref().unwrap_or("mock:bow").parse().unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(1)
    });
    let addr = args.next().unwrap_or_else(|| "127.0.0.1:8089".into());
    let model = MockModel::new(spec, Arc::new(Knowledge::default()));
    let server = tiny_http::Server::http(&addr).expect("bind address");
    println!("serving {spec} on http://{addr}");
    for mut req in server.incoming_requests() {
        let mut body = String::new();
        let _ = req.as_reader().read_to_string(&mut body);
        let (status, text) = handle_wire_request(&model, req.method().as_str(), req.url(), &body);
        let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
        let _ = req.respond(tiny_http::Response::from_string(text).with_status_code(status).with_header(header));
    }
}
