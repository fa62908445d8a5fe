pub mod compare;
pub mod quantize;
pub mod run;
pub mod verify;
