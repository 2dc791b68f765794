//! Users and sessions, the internal passport broker (visas), access
//! requests, and the encrypted credential vault.
//!
//! Login credentials and access permissions are kept apart: a user's
//! password only proves identity, while what that identity may read is
//! decided by visas on each collection.

mod requests;
mod users;
mod vault;
mod visas;

pub use requests::{AccessRequest, AccessRequests, Decision, RequestStatus, MAX_MESSAGE_LEN};
pub use users::{
    validate_email, validate_login, AuthToken, HashCost, NewUser, Password, Principal, ResetToken,
    Role, User, UserDirectory, UserProfile, UserSettings, UserUpdate,
};
pub use vault::{
    CredentialInfo, CredentialVault, Fernet, SecretBytes, SecretKey, StorageCredential,
    MAX_SECRET_LEN, SECRET_KEY_ENV,
};
pub use visas::{GrantAction, GrantRecord, Visa, VisaBroker};
