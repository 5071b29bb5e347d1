pub mod codec;
pub mod crypto;
pub mod pre;
pub mod redactable;
pub mod eid;
pub mod scenario;
pub mod world;
pub mod envelope;
pub mod actors;
pub mod harness;
mod hexser;
pub mod audit;
pub mod batch;
pub mod compare;
pub mod mutation;
