use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::http::{Method, StatusCode, Uri};
use axum::response::IntoResponse;
use axum::{Json, Router};

use super::Api;

/// Serves `api` on `0.0.0.0:port` until the process is stopped.
pub async fn serve(api: Api, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], port))).await?;
    serve_on(api, listener).await
}

/// Serves `api` on an already bound listener.
pub async fn serve_on(api: Api, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    let api = Arc::new(api);
    let app = Router::new().fallback(move |method: Method, uri: Uri, body: Bytes| {
        let api = api.clone();
        async move {
            let target = uri.path_and_query().map_or(uri.path().to_string(), |p| p.as_str().to_string());
            let (status, value) = tokio::task::spawn_blocking(move || api.handle(method.as_str(), &target, &body))
                .await
                .unwrap_or_else(|e| (500, serde_json::json!({ "error": e.to_string() })));
            (StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR), Json(value)).into_response()
        }
    });
    axum::serve(listener, app).await
}
