#![allow(dead_code)]

pub mod strategy;
