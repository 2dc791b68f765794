use std::fmt;

use aes::cipher::block_padding::Pkcs7;
use aes::cipher::{BlockDecryptMut, BlockEncryptMut, KeyIvInit};
use base64::engine::general_purpose::URL_SAFE;
use base64::Engine;
use chrono::{DateTime, Utc};
use hmac::{Hmac, Mac};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize};
use sha2::Sha256;

use super::users::Principal;
use crate::clock::SharedClock;
use crate::error::{Error, Result};
use crate::ids::{CredentialId, UserId};
use crate::storage::StorageType;
use crate::store::{Batch, Keyspace, Repository};

type Aes128CbcEnc = cbc::Encryptor<aes::Aes128>;
type Aes128CbcDec = cbc::Decryptor<aes::Aes128>;
type HmacSha256 = Hmac<Sha256>;

pub const SECRET_KEY_ENV: &str = "LAKEHOUSE_SECRET_KEY";

/// Byte buffer for key material that is wiped on drop and never printed.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretBytes(Vec<u8>);

impl SecretBytes {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Self {
        Self(bytes.into())
    }

    pub fn expose(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Drop for SecretBytes {
    fn drop(&mut self) {
        for b in self.0.iter_mut() {
            // SAFETY: `b` is a valid, aligned, exclusive reference.
            unsafe { std::ptr::write_volatile(b, 0) };
        }
    }
}

impl fmt::Debug for SecretBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretBytes({} bytes)", self.0.len())
    }
}

impl<'de> Deserialize<'de> for SecretBytes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d).map(|s| SecretBytes(s.into_bytes()))
    }
}

/// Deployment key: 32 bytes, URL-safe base64 encoded. The first half signs,
/// the second half encrypts.
#[derive(Clone)]
pub struct SecretKey {
    signing: [u8; 16],
    encryption: [u8; 16],
}

impl SecretKey {
    pub fn from_base64(encoded: &str) -> Result<Self> {
        let raw = URL_SAFE
            .decode(encoded.trim())
            .map_err(|_| Error::Config("secret key is not URL-safe base64".into()))?;
        let raw: [u8; 32] = raw
            .try_into()
            .map_err(|_| Error::Config("secret key must decode to 32 bytes".into()))?;
        Ok(Self::from_bytes(raw))
    }

    pub fn from_bytes(raw: [u8; 32]) -> Self {
        let mut signing = [0u8; 16];
        let mut encryption = [0u8; 16];
        signing.copy_from_slice(&raw[..16]);
        encryption.copy_from_slice(&raw[16..]);
        Self { signing, encryption }
    }

    pub fn generate() -> Self {
        let mut raw = [0u8; 32];
        OsRng.fill_bytes(&mut raw);
        Self::from_bytes(raw)
    }

    /// Reads the key from `LAKEHOUSE_SECRET_KEY`.
    pub fn from_env() -> Result<Self> {
        match std::env::var(SECRET_KEY_ENV) {
            Ok(v) if !v.trim().is_empty() => Self::from_base64(&v),
            _ => Err(Error::Config(format!("{SECRET_KEY_ENV} is not set"))),
        }
    }

    pub fn to_base64(&self) -> String {
        let mut raw = [0u8; 32];
        raw[..16].copy_from_slice(&self.signing);
        raw[16..].copy_from_slice(&self.encryption);
        URL_SAFE.encode(raw)
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(***)")
    }
}

const VERSION: u8 = 0x80;
const HEADER: usize = 1 + 8 + 16;
const TAG: usize = 32;

/// Fernet tokens: version byte, big-endian timestamp, IV, AES-128-CBC
/// ciphertext and an HMAC-SHA256 tag over everything before it, all
/// URL-safe base64 encoded. Interoperable with other Fernet implementations.
#[derive(Debug, Clone)]
pub struct Fernet {
    key: SecretKey,
}

impl Fernet {
    pub fn new(key: SecretKey) -> Self {
        Self { key }
    }

    pub fn seal(&self, plaintext: &[u8]) -> String {
        let mut iv = [0u8; 16];
        OsRng.fill_bytes(&mut iv);
        self.seal_with(plaintext, Utc::now().timestamp().max(0) as u64, iv)
    }

    pub fn seal_with(&self, plaintext: &[u8], timestamp: u64, iv: [u8; 16]) -> String {
        let ciphertext = Aes128CbcEnc::new(&self.key.encryption.into(), &iv.into())
            .encrypt_padded_vec_mut::<Pkcs7>(plaintext);
        let mut token = Vec::with_capacity(HEADER + ciphertext.len() + TAG);
        token.push(VERSION);
        token.extend_from_slice(&timestamp.to_be_bytes());
        token.extend_from_slice(&iv);
        token.extend_from_slice(&ciphertext);
        let tag = self.mac(&token).finalize().into_bytes();
        token.extend_from_slice(&tag);
        URL_SAFE.encode(token)
    }

    pub fn open(&self, token: &str) -> Result<Vec<u8>> {
        let raw = URL_SAFE.decode(token).map_err(|_| Error::Integrity)?;
        self.open_raw(&raw)
    }

    /// Opens an already base64-decoded token.
    pub fn open_raw(&self, raw: &[u8]) -> Result<Vec<u8>> {
        if raw.len() < HEADER + 16 + TAG || !(raw.len() - HEADER - TAG).is_multiple_of(16) || raw[0] != VERSION {
            return Err(Error::Integrity);
        }
        let (body, tag) = raw.split_at(raw.len() - TAG);
        self.mac(body).verify_slice(tag).map_err(|_| Error::Integrity)?;
        let iv: [u8; 16] = body[9..HEADER].try_into().expect("fixed header layout");
        Aes128CbcDec::new(&self.key.encryption.into(), &iv.into())
            .decrypt_padded_vec_mut::<Pkcs7>(&body[HEADER..])
            .map_err(|_| Error::Integrity)
    }

    fn mac(&self, data: &[u8]) -> HmacSha256 {
        let mut mac = HmacSha256::new_from_slice(&self.key.signing).expect("hmac accepts any key length");
        mac.update(data);
        mac
    }
}

/// Persisted credential. The key material exists only as `ciphertext`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageCredential {
    pub credential_id: CredentialId,
    pub storage_type: StorageType,
    pub label: String,
    pub ciphertext: String,
    pub registered_by: UserId,
    pub created_at: DateTime<Utc>,
}

/// What the API reveals about a credential.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialInfo {
    pub credential_id: CredentialId,
    pub storage_type: StorageType,
    pub label: String,
    pub registered_by: UserId,
    pub created_at: DateTime<Utc>,
}

impl From<&StorageCredential> for CredentialInfo {
    fn from(c: &StorageCredential) -> Self {
        Self {
            credential_id: c.credential_id.clone(),
            storage_type: c.storage_type,
            label: c.label.clone(),
            registered_by: c.registered_by.clone(),
            created_at: c.created_at,
        }
    }
}

/// Largest accepted key material.
pub const MAX_SECRET_LEN: usize = 1 << 20;

/// Encrypted storage for backend access keys.
#[derive(Debug)]
pub struct CredentialVault {
    repo: Repository,
    clock: SharedClock,
    fernet: Fernet,
}

impl CredentialVault {
    pub fn new(repo: Repository, clock: SharedClock, key: SecretKey) -> Self {
        Self {
            repo,
            clock,
            fernet: Fernet::new(key),
        }
    }

    pub fn seal_secret(&self, plaintext: &SecretBytes) -> Result<String> {
        if plaintext.is_empty() {
            return Err(Error::invalid("secret", "must not be empty"));
        }
        Ok(self.fernet.seal(plaintext.expose()))
    }

    pub fn open_secret(&self, ciphertext: &str) -> Result<SecretBytes> {
        self.fernet.open(ciphertext).map(SecretBytes)
    }

    pub fn add(
        &self,
        actor: &Principal,
        storage_type: StorageType,
        label: &str,
        secret: &SecretBytes,
    ) -> Result<CredentialInfo> {
        actor.require_data_manager("storing credentials")?;
        let label = label.trim();
        let mut errors = Vec::new();
        if label.is_empty() || label.chars().count() > 128 || label.chars().any(char::is_control) {
            errors.push(crate::error::FieldError::new("label", "must be 1-128 printable characters"));
        }
        if secret.is_empty() {
            errors.push(crate::error::FieldError::new("secret", "must not be empty"));
        } else if secret.len() > MAX_SECRET_LEN {
            errors.push(crate::error::FieldError::new("secret", "larger than 1 MiB"));
        }
        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        let credential = StorageCredential {
            credential_id: CredentialId::generate(),
            storage_type,
            label: label.to_owned(),
            ciphertext: self.seal_secret(secret)?,
            registered_by: actor.user_id.clone(),
            created_at: self.clock.now(),
        };
        let mut batch = Batch::new();
        batch.insert(Keyspace::Credentials, credential.credential_id.as_str(), &credential);
        self.repo.apply(batch)?;
        Ok(CredentialInfo::from(&credential))
    }

    fn credential(&self, id: &CredentialId) -> Result<StorageCredential> {
        self.repo
            .get::<StorageCredential>(Keyspace::Credentials, id.as_str())?
            .map(|s| s.value)
            .ok_or_else(|| Error::not_found(format!("credential {id}")))
    }

    pub fn get(&self, id: &CredentialId) -> Result<CredentialInfo> {
        self.credential(id).map(|c| CredentialInfo::from(&c))
    }

    pub fn list(&self) -> Result<Vec<CredentialInfo>> {
        Ok(self
            .repo
            .scan::<StorageCredential>(Keyspace::Credentials, "")?
            .iter()
            .map(|s| CredentialInfo::from(&s.value))
            .collect())
    }

    /// Decrypts a credential for handing to a storage adapter.
    pub fn reveal(&self, id: &CredentialId) -> Result<SecretBytes> {
        self.open_secret(&self.credential(id)?.ciphertext)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEY: &str = "AAECAwQFBgcICQoLDA0ODxAREhMUFRYXGBkaGxwdHh8=";
    // Produced by the reference Python implementation with the same key,
    // timestamp 1700000000 and IV bytes 100..116.
    const TOKEN: &str = "gAAAAABlU_EAZGVmZ2hpamtsbW5vcHFyc8wBgxpKTuRXiBL2KWgIiuOEUXNvvWqfl0G9YN1dxa9QPG5b052QLzq3XuPmhg8y_MSYyFSHoHbRjbY1tjcJz5c=";

    fn iv() -> [u8; 16] {
        std::array::from_fn(|i| 100 + i as u8)
    }

    #[test]
    fn matches_reference_token() {
        let f = Fernet::new(SecretKey::from_base64(KEY).unwrap());
        assert_eq!(f.seal_with(b"access-key:secret/42", 1_700_000_000, iv()), TOKEN);
        assert_eq!(f.open(TOKEN).unwrap(), b"access-key:secret/42");
    }

    #[test]
    fn seal_is_randomized() {
        let f = Fernet::new(SecretKey::generate());
        let a = f.seal(b"x");
        let b = f.seal(b"x");
        assert_ne!(a, b);
        assert_eq!(f.open(&a).unwrap(), b"x");
        assert_eq!(f.open(&b).unwrap(), b"x");
    }

    #[test]
    fn every_bit_flip_is_rejected() {
        let f = Fernet::new(SecretKey::from_base64(KEY).unwrap());
        let raw = URL_SAFE.decode(TOKEN).unwrap();
        for bit in 0..raw.len() * 8 {
            let mut t = raw.clone();
            t[bit / 8] ^= 1 << (bit % 8);
            assert!(matches!(f.open_raw(&t), Err(Error::Integrity)), "bit {bit}");
        }
    }

    #[test]
    fn wrong_key_and_garbage_are_rejected() {
        let f = Fernet::new(SecretKey::generate());
        assert!(matches!(f.open(TOKEN), Err(Error::Integrity)));
        assert!(matches!(f.open("not a token"), Err(Error::Integrity)));
        assert!(matches!(f.open(""), Err(Error::Integrity)));
        assert!(matches!(f.open_raw(&[0x80; 40]), Err(Error::Integrity)));
    }

    #[test]
    fn bad_keys_are_configuration_errors() {
        assert!(matches!(SecretKey::from_base64("short"), Err(Error::Config(_))));
        assert!(matches!(SecretKey::from_base64("AAAA"), Err(Error::Config(_))));
        let k = SecretKey::generate();
        assert_eq!(SecretKey::from_base64(&k.to_base64()).unwrap().to_base64(), k.to_base64());
        assert_eq!(format!("{k:?}"), "SecretKey(***)");
    }

    #[test]
    fn secret_bytes_never_print() {
        let s = SecretBytes::new(b"hunter2".to_vec());
        assert!(!format!("{s:?}").contains("hunter2"));
    }
}
