pub mod adversary;
pub mod crypto;
pub mod protocol;
pub mod sim;
