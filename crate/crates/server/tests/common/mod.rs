#![allow(dead_code)]

use std::sync::Arc;

use meetcues_server::api::{self, ApiConfig};
use meetcues_server::service::{JobMode, Notifier, NullNotifier, Service, ServiceConfig};
use meetcues_server::store::{MemoryStore, Storage};
use tokio::sync::oneshot;

/// An in-process server on an ephemeral port; shuts down on drop.
pub struct TestServer {
    pub base: String,
    pub service: Service,
    _stop: oneshot::Sender<()>,
}

pub async fn spawn_with(store: Arc<dyn Storage>, notifier: Arc<dyn Notifier>, config: ApiConfig) -> TestServer {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let service_config = ServiceConfig { jobs: JobMode::Background, public_url: base.clone(), ..Default::default() };
    let service = Service::open(store, service_config, notifier).unwrap();
    let (stop, stopped) = oneshot::channel::<()>();
    let served = service.clone();
    tokio::spawn(async move {
        api::serve(listener, served, config, async {
            let _ = stopped.await;
        })
        .await
        .unwrap();
    });
    TestServer { base, service, _stop: stop }
}

/// Simulation-mode server over a memory store.
pub async fn spawn() -> TestServer {
    let config = ApiConfig { simulation: true, ..Default::default() };
    spawn_with(Arc::new(MemoryStore::new()), Arc::new(NullNotifier), config).await
}
