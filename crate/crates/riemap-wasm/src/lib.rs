//! wasm-bindgen surface; exports land after the core API settles.
