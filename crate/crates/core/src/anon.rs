//! Attendee anonymization: a keyed hash of the normalized email under the
//! meeting salt. The email itself is never retained by the derivation.

use hmac::{Hmac, KeyInit, Mac};
use sha2::Sha256;

use crate::domain::{AttendeeId, Salt};
use crate::error::{Result, ValidationError};

type HmacSha256 = Hmac<Sha256>;

/// `lowercase(trim(email))`.
pub fn normalize_email(email: &str) -> String {
    email.trim().to_lowercase()
}

/// Accepts addresses with exactly one `@` and non-empty local and domain parts.
pub fn validate_email(email: &str) -> Result<()> {
    let email = email.trim();
    let mut parts = email.split('@');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(local), Some(domain), None) if !local.is_empty() && !domain.is_empty() => Ok(()),
        _ => Err(ValidationError::Email),
    }
}

/// First 128 bits of HMAC-SHA256 keyed by the salt over the normalized email.
pub fn derive_attendee_id(salt: &Salt, email: &str) -> AttendeeId {
    let mut mac = HmacSha256::new_from_slice(salt.as_bytes()).expect("HMAC accepts any key length");
    mac.update(normalize_email(email).as_bytes());
    let digest = mac.finalize().into_bytes();
    let mut id = [0u8; 16];
    id.copy_from_slice(&digest[..16]);
    AttendeeId::from_bytes(id)
}
