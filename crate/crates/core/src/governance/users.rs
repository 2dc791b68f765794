use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};
use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use chrono::{DateTime, Duration, Utc};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clock::SharedClock;
use crate::error::{Error, FieldError, Result};
use crate::ids::UserId;
use crate::store::{Batch, Expect, Keyspace, Repository};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Consumer,
    Publisher,
    DataManager,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Consumer, Role::Publisher, Role::DataManager];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Consumer => "consumer",
            Role::Publisher => "publisher",
            Role::DataManager => "data-manager",
        }
    }

    pub fn can_publish(self) -> bool {
        matches!(self, Role::Publisher | Role::DataManager)
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown role `{s}` (expected consumer, publisher or data-manager)"))
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The authenticated caller of an operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Principal {
    pub user_id: UserId,
    pub role: Role,
}

impl Principal {
    pub fn new(user_id: UserId, role: Role) -> Self {
        Self { user_id, role }
    }

    pub fn is_data_manager(&self) -> bool {
        self.role == Role::DataManager
    }

    pub(crate) fn require_data_manager(&self, what: &str) -> Result<()> {
        if self.is_data_manager() {
            Ok(())
        } else {
            Err(Error::forbidden(format!("{what} requires the data-manager role")))
        }
    }
}

/// Persisted user document. Never returned by the API; see [`UserProfile`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    pub email: String,
    pub login: String,
    pub password_hash: String,
    pub role: Role,
    pub created_at: DateTime<Utc>,
}

impl User {
    pub fn profile(&self) -> UserProfile {
        UserProfile {
            id: self.id.clone(),
            email: self.email.clone(),
            login: self.login.clone(),
            role: self.role,
            created_at: self.created_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: UserId,
    pub email: String,
    pub login: String,
    pub role: Role,
    pub created_at: DateTime<Utc>,
}

/// A password held only long enough to hash or verify it.
#[derive(Clone, Deserialize)]
#[serde(transparent)]
pub struct Password(String);

impl Password {
    pub const MIN_LEN: usize = 8;
    pub const MAX_LEN: usize = 1024;

    pub fn new(p: impl Into<String>) -> Self {
        Self(p.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    pub fn check(&self, field: &str) -> Option<FieldError> {
        let n = self.0.chars().count();
        if n < Self::MIN_LEN {
            Some(FieldError::new(field, format!("must be at least {} characters", Self::MIN_LEN)))
        } else if self.0.len() > Self::MAX_LEN {
            Some(FieldError::new(field, "too long"))
        } else {
            None
        }
    }
}

impl fmt::Debug for Password {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Password(***)")
    }
}

#[derive(Debug, Clone)]
pub struct NewUser {
    pub email: String,
    pub login: String,
    pub password: Password,
    pub role: Role,
}

#[derive(Debug, Clone, Default)]
pub struct UserUpdate {
    pub email: Option<String>,
    pub password: Option<Password>,
    pub role: Option<Role>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthToken {
    pub token: String,
    pub user_id: UserId,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetToken {
    pub reset_token: String,
    pub user_id: UserId,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Session {
    user_id: UserId,
    issued_at: DateTime<Utc>,
    expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PendingReset {
    user_id: UserId,
    expires_at: DateTime<Utc>,
}

/// Argon2id cost parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashCost {
    pub memory_kib: u32,
    pub iterations: u32,
}

impl Default for HashCost {
    fn default() -> Self {
        Self {
            memory_kib: Params::DEFAULT_M_COST,
            iterations: Params::DEFAULT_T_COST,
        }
    }
}

impl HashCost {
    /// Cheapest accepted setting; for tests only.
    pub const MINIMAL: HashCost = HashCost {
        memory_kib: 64,
        iterations: 1,
    };
}

#[derive(Debug, Clone)]
pub struct UserSettings {
    pub token_ttl: Duration,
    pub reset_ttl: Duration,
    /// Whether anonymous callers may self-register as consumer or publisher.
    pub open_registration: bool,
    pub hash_cost: HashCost,
}

impl Default for UserSettings {
    fn default() -> Self {
        Self {
            token_ttl: Duration::hours(12),
            reset_ttl: Duration::hours(1),
            open_registration: true,
            hash_cost: HashCost::default(),
        }
    }
}

const BOOTSTRAP_KEY: &str = "bootstrap";

fn email_key(email: &str) -> String {
    format!("email:{}", email.to_lowercase())
}

fn login_key(login: &str) -> String {
    format!("login:{}", login.to_lowercase())
}

fn token_digest(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn random_token() -> String {
    let mut raw = [0u8; 32];
    OsRng.fill_bytes(&mut raw);
    URL_SAFE_NO_PAD.encode(raw)
}

pub fn validate_email(email: &str) -> Option<FieldError> {
    let bad = |m: &str| Some(FieldError::new("email", m));
    if email.len() > 254 {
        return bad("too long");
    }
    if email.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return bad("must not contain whitespace");
    }
    let Some((local, domain)) = email.split_once('@') else {
        return bad("must contain `@`");
    };
    if local.is_empty() || domain.contains('@') {
        return bad("malformed address");
    }
    let labels: Vec<&str> = domain.split('.').collect();
    if labels.len() < 2 || labels.iter().any(|l| l.is_empty()) {
        return bad("domain must contain a dot-separated name");
    }
    None
}

pub fn validate_login(login: &str) -> Option<FieldError> {
    if login.is_empty() || login.len() > 64 {
        return Some(FieldError::new("login", "must be 1-64 characters"));
    }
    if !login
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
    {
        return Some(FieldError::new("login", "may only contain letters, digits, `.`, `_` and `-`"));
    }
    if login.contains('@') {
        return Some(FieldError::new("login", "must not contain `@`"));
    }
    None
}

fn collect(errors: impl IntoIterator<Item = Option<FieldError>>) -> Result<()> {
    let errors: Vec<FieldError> = errors.into_iter().flatten().collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(errors))
    }
}

/// User accounts, sessions and password recovery.
#[derive(Debug)]
pub struct UserDirectory {
    repo: Repository,
    clock: SharedClock,
    settings: UserSettings,
    dummy_hash: OnceLock<String>,
}

impl UserDirectory {
    pub fn new(repo: Repository, clock: SharedClock, settings: UserSettings) -> Self {
        Self {
            repo,
            clock,
            settings,
            dummy_hash: OnceLock::new(),
        }
    }

    pub fn settings(&self) -> &UserSettings {
        &self.settings
    }

    fn hasher(&self) -> Argon2<'static> {
        let cost = self.settings.hash_cost;
        let params = Params::new(cost.memory_kib, cost.iterations, 1, None)
            .expect("argon2 cost validated at startup");
        Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
    }

    fn hash(&self, password: &Password) -> Result<String> {
        let salt = SaltString::generate(&mut OsRng);
        self.hasher()
            .hash_password(password.expose().as_bytes(), &salt)
            .map(|h| h.to_string())
            .map_err(|e| Error::Internal(format!("password hashing: {e}")))
    }

    fn verify(&self, password: &Password, hash: &str) -> bool {
        PasswordHash::new(hash)
            .map(|h| {
                self.hasher()
                    .verify_password(password.expose().as_bytes(), &h)
                    .is_ok()
            })
            .unwrap_or(false)
    }

    /// Spends the same work as a real verification so unknown logins and
    /// wrong passwords are indistinguishable by timing.
    fn burn_verification(&self, password: &Password) {
        let hash = self.dummy_hash.get_or_init(|| {
            self.hash(&Password::new("placeholder-password"))
                .unwrap_or_default()
        });
        let _ = self.verify(password, hash);
    }

    pub fn is_bootstrapped(&self) -> Result<bool> {
        Ok(self
            .repo
            .get::<serde_json::Value>(Keyspace::Meta, BOOTSTRAP_KEY)?
            .is_some())
    }

    /// Creates an account. The very first account may be created by anyone
    /// with any role; afterwards data-managers may create any account and,
    /// with open registration, anonymous callers may create consumers and
    /// publishers.
    pub fn create(&self, actor: Option<&Principal>, new: NewUser) -> Result<UserProfile> {
        collect([
            validate_email(&new.email),
            validate_login(&new.login),
            new.password.check("password"),
        ])?;
        let bootstrapped = self.is_bootstrapped()?;
        if bootstrapped {
            match actor {
                Some(p) if p.is_data_manager() => {}
                Some(_) if new.role == Role::DataManager => {
                    return Err(Error::forbidden("only a data-manager can create data-manager accounts"))
                }
                Some(_) => {
                    return Err(Error::forbidden("only a data-manager can create accounts for others"))
                }
                None if !self.settings.open_registration => return Err(Error::Authentication),
                None if new.role == Role::DataManager => {
                    return Err(Error::forbidden("only a data-manager can create data-manager accounts"))
                }
                None => {}
            }
        }
        self.check_unique(Some(&new.email), Some(&new.login), None)?;
        let user = User {
            id: UserId::generate(),
            email: new.email.clone(),
            login: new.login.clone(),
            password_hash: self.hash(&new.password)?,
            role: new.role,
            created_at: self.clock.now(),
        };
        let mut batch = Batch::new();
        batch
            .insert(Keyspace::UserIndex, email_key(&user.email), &user.id)
            .insert(Keyspace::UserIndex, login_key(&user.login), &user.id)
            .insert(Keyspace::Users, user.id.as_str(), &user);
        if !bootstrapped {
            batch.insert(Keyspace::Meta, BOOTSTRAP_KEY, &user.id);
        }
        match self.repo.apply(batch) {
            Ok(_) => Ok(user.profile()),
            Err(e) if e.is_conflict() => {
                self.check_unique(Some(&new.email), Some(&new.login), None)?;
                Err(Error::conflict("account creation raced with another; retry"))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn check_unique(&self, email: Option<&str>, login: Option<&str>, owner: Option<&UserId>) -> Result<()> {
        let taken = |key: String| -> Result<bool> {
            Ok(self
                .repo
                .get::<UserId>(Keyspace::UserIndex, &key)?
                .is_some_and(|s| Some(&s.value) != owner))
        };
        if let Some(email) = email {
            if taken(email_key(email))? {
                return Err(Error::conflict(format!("email `{email}` is already registered")));
            }
        }
        if let Some(login) = login {
            if taken(login_key(login))? {
                return Err(Error::conflict(format!("login `{login}` is already taken")));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &UserId) -> Result<UserProfile> {
        self.user(id).map(|u| u.profile())
    }

    pub(crate) fn user(&self, id: &UserId) -> Result<User> {
        self.repo
            .get::<User>(Keyspace::Users, id.as_str())?
            .map(|s| s.value)
            .ok_or_else(|| Error::not_found(format!("user {id}")))
    }

    pub fn exists(&self, id: &UserId) -> Result<bool> {
        Ok(self.repo.get::<serde_json::Value>(Keyspace::Users, id.as_str())?.is_some())
    }

    fn require_self_or_manager(actor: &Principal, id: &UserId) -> Result<()> {
        if actor.is_data_manager() || &actor.user_id == id {
            Ok(())
        } else {
            Err(Error::forbidden("users may only modify their own account"))
        }
    }

    pub fn update(&self, actor: &Principal, id: &UserId, update: UserUpdate) -> Result<UserProfile> {
        Self::require_self_or_manager(actor, id)?;
        collect([
            update.email.as_deref().and_then(validate_email),
            update.password.as_ref().and_then(|p| p.check("password")),
        ])?;
        if update.role.is_some() && !actor.is_data_manager() {
            return Err(Error::forbidden("only a data-manager can change roles"));
        }
        let new_hash = update.password.as_ref().map(|p| self.hash(p)).transpose()?;
        loop {
            let stored = self
                .repo
                .get::<User>(Keyspace::Users, id.as_str())?
                .ok_or_else(|| Error::not_found(format!("user {id}")))?;
            let mut user = stored.value.clone();
            let mut batch = Batch::new();
            if let Some(email) = &update.email {
                if email_key(email) != email_key(&user.email) {
                    self.check_unique(Some(email), None, Some(id))?;
                    batch
                        .delete(Keyspace::UserIndex, email_key(&user.email))
                        .insert(Keyspace::UserIndex, email_key(email), id);
                }
                user.email = email.clone();
            }
            if let Some(hash) = &new_hash {
                user.password_hash = hash.clone();
            }
            if let Some(role) = update.role {
                user.role = role;
            }
            batch.put_if(Keyspace::Users, id.as_str(), &user, Expect::Revision(stored.revision));
            match self.repo.apply(batch) {
                Ok(_) => return Ok(user.profile()),
                Err(e) if e.is_conflict() => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Deletes an account, its uniqueness claims and its sessions.
    pub fn delete(&self, actor: &Principal, id: &UserId) -> Result<()> {
        Self::require_self_or_manager(actor, id)?;
        let stored = self
            .repo
            .get::<User>(Keyspace::Users, id.as_str())?
            .ok_or_else(|| Error::not_found(format!("user {id}")))?;
        let mut batch = Batch::new();
        batch
            .delete_if(Keyspace::Users, id.as_str(), stored.revision)
            .delete(Keyspace::UserIndex, email_key(&stored.value.email))
            .delete(Keyspace::UserIndex, login_key(&stored.value.login));
        for s in self.repo.scan::<Session>(Keyspace::Sessions, "")? {
            if &s.value.user_id == id {
                batch.delete(Keyspace::Sessions, s.key);
            }
        }
        self.repo.apply(batch)?;
        Ok(())
    }

    /// Issues a one-time reset token. Without mail delivery the token is
    /// handed to the requesting data-manager.
    pub fn issue_reset(&self, actor: &Principal, id: &UserId) -> Result<ResetToken> {
        actor.require_data_manager("password reset")?;
        self.user(id)?;
        let token = random_token();
        let expires_at = self.clock.now() + self.settings.reset_ttl;
        let mut batch = Batch::new();
        batch.insert(
            Keyspace::ResetTokens,
            token_digest(&token),
            &PendingReset {
                user_id: id.clone(),
                expires_at,
            },
        );
        self.repo.apply(batch)?;
        Ok(ResetToken {
            reset_token: token,
            user_id: id.clone(),
            expires_at,
        })
    }

    /// Consumes a reset token and sets a new password.
    pub fn complete_reset(&self, id: &UserId, token: &str, new_password: &Password) -> Result<()> {
        collect([new_password.check("new_password")])?;
        let key = token_digest(token);
        let pending = self
            .repo
            .get::<PendingReset>(Keyspace::ResetTokens, &key)?
            .filter(|p| &p.value.user_id == id && self.clock.now() < p.value.expires_at)
            .ok_or(Error::Authentication)?;
        let hash = self.hash(new_password)?;
        let stored = self
            .repo
            .get::<User>(Keyspace::Users, id.as_str())?
            .ok_or_else(|| Error::not_found(format!("user {id}")))?;
        let mut user = stored.value;
        user.password_hash = hash;
        let mut batch = Batch::new();
        batch
            .delete_if(Keyspace::ResetTokens, key, pending.revision)
            .put_if(Keyspace::Users, id.as_str(), &user, Expect::Revision(stored.revision));
        self.repo.apply(batch).map_err(|e| {
            if e.is_conflict() {
                Error::Authentication
            } else {
                e.into()
            }
        })?;
        Ok(())
    }

    /// Verifies credentials and opens a session. Every failure yields the
    /// same [`Error::Authentication`].
    pub fn login(&self, login_or_email: &str, password: &Password) -> Result<AuthToken> {
        let key = if login_or_email.contains('@') {
            email_key(login_or_email)
        } else {
            login_key(login_or_email)
        };
        let user = match self.repo.get::<UserId>(Keyspace::UserIndex, &key)? {
            Some(id) => self.repo.get::<User>(Keyspace::Users, id.value.as_str())?,
            None => None,
        };
        let Some(user) = user.map(|s| s.value) else {
            self.burn_verification(password);
            return Err(Error::Authentication);
        };
        if !self.verify(password, &user.password_hash) {
            return Err(Error::Authentication);
        }
        let token = random_token();
        let issued_at = self.clock.now();
        let session = Session {
            user_id: user.id.clone(),
            issued_at,
            expires_at: issued_at + self.settings.token_ttl,
        };
        let mut batch = Batch::new();
        batch.insert(Keyspace::Sessions, token_digest(&token), &session);
        self.repo.apply(batch)?;
        Ok(AuthToken {
            token,
            user_id: user.id,
            issued_at,
            expires_at: session.expires_at,
        })
    }

    /// Resolves a bearer token to its principal. The role is read from the
    /// current user document, so role changes apply to live sessions.
    pub fn authenticate(&self, token: &str) -> Result<Principal> {
        let session = self
            .repo
            .get::<Session>(Keyspace::Sessions, &token_digest(token))?
            .map(|s| s.value)
            .ok_or(Error::Authentication)?;
        if self.clock.now() >= session.expires_at {
            return Err(Error::Authentication);
        }
        let user = self
            .repo
            .get::<User>(Keyspace::Users, session.user_id.as_str())?
            .ok_or(Error::Authentication)?
            .value;
        Ok(Principal::new(user.id, user.role))
    }

    /// Removes expired sessions and reset tokens.
    pub fn prune_sessions(&self) -> Result<usize> {
        let now = self.clock.now();
        let mut batch = Batch::new();
        let mut n = 0;
        for s in self.repo.scan::<Session>(Keyspace::Sessions, "")? {
            if s.value.expires_at <= now {
                batch.delete_if(Keyspace::Sessions, s.key, s.revision);
                n += 1;
            }
        }
        for r in self.repo.scan::<PendingReset>(Keyspace::ResetTokens, "")? {
            if r.value.expires_at <= now {
                batch.delete_if(Keyspace::ResetTokens, r.key, r.revision);
                n += 1;
            }
        }
        if n > 0 {
            self.repo.apply(batch)?;
        }
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::clock::ManualClock;

    fn dir() -> (UserDirectory, Arc<ManualClock>) {
        let clock = Arc::new(ManualClock::default());
        let settings = UserSettings {
            hash_cost: HashCost::MINIMAL,
            ..UserSettings::default()
        };
        (UserDirectory::new(Repository::in_memory(), clock.clone(), settings), clock)
    }

    fn new_user(email: &str, login: &str, role: Role) -> NewUser {
        NewUser {
            email: email.into(),
            login: login.into(),
            password: Password::new("correct horse"),
            role,
        }
    }

    #[test]
    fn first_account_bootstraps_then_registration_is_gated() {
        let (d, _) = dir();
        let admin = d.create(None, new_user("dm@x.org", "dm", Role::DataManager)).unwrap();
        assert!(d.is_bootstrapped().unwrap());
        let err = d.create(None, new_user("e@x.org", "evil", Role::DataManager)).unwrap_err();
        assert!(matches!(err, Error::Forbidden(_)));
        d.create(None, new_user("p@x.org", "pub", Role::Publisher)).unwrap();
        let dm = Principal::new(admin.id, Role::DataManager);
        d.create(Some(&dm), new_user("dm2@x.org", "dm2", Role::DataManager)).unwrap();
    }

    #[test]
    fn closed_registration_requires_a_manager() {
        let clock = Arc::new(ManualClock::default());
        let settings = UserSettings {
            hash_cost: HashCost::MINIMAL,
            open_registration: false,
            ..UserSettings::default()
        };
        let d = UserDirectory::new(Repository::in_memory(), clock, settings);
        d.create(None, new_user("dm@x.org", "dm", Role::DataManager)).unwrap();
        assert!(matches!(
            d.create(None, new_user("c@x.org", "c", Role::Consumer)),
            Err(Error::Authentication)
        ));
    }

    #[test]
    fn duplicates_conflict_case_insensitively() {
        let (d, _) = dir();
        d.create(None, new_user("alice@x.org", "alice", Role::Consumer)).unwrap();
        assert!(matches!(
            d.create(None, new_user("ALICE@x.org", "alice2", Role::Consumer)),
            Err(Error::Conflict(_))
        ));
        assert!(matches!(
            d.create(None, new_user("other@x.org", "Alice", Role::Consumer)),
            Err(Error::Conflict(_))
        ));
    }

    #[test]
    fn invalid_fields_are_all_reported() {
        let (d, _) = dir();
        let err = d
            .create(
                None,
                NewUser {
                    email: "nope".into(),
                    login: "bad login".into(),
                    password: Password::new("short"),
                    role: Role::Consumer,
                },
            )
            .unwrap_err();
        let fields: Vec<_> = err.field_errors().iter().map(|f| f.field.as_str()).collect();
        assert_eq!(fields, ["email", "login", "password"]);
    }

    #[test]
    fn stored_document_holds_no_plaintext_password() {
        let (d, _) = dir();
        let u = d.create(None, new_user("alice@x.org", "alice", Role::Consumer)).unwrap();
        let raw = d.repo.store().get(Keyspace::Users, u.id.as_str()).unwrap().unwrap();
        let text = raw.body.to_string();
        assert!(!text.contains("correct horse"));
        assert!(text.contains("$argon2id$"));
    }

    #[test]
    fn login_failures_are_indistinguishable() {
        let (d, _) = dir();
        d.create(None, new_user("alice@x.org", "alice", Role::Consumer)).unwrap();
        let wrong = d.login("alice", &Password::new("wrong password")).unwrap_err();
        let unknown = d.login("bob", &Password::new("correct horse")).unwrap_err();
        assert_eq!(wrong.to_string(), unknown.to_string());
        assert_eq!(wrong.code(), unknown.code());
        assert!(d.login("alice@X.org", &Password::new("correct horse")).is_ok());
    }

    #[test]
    fn tokens_expire_with_the_clock() {
        let (d, clock) = dir();
        d.create(None, new_user("alice@x.org", "alice", Role::Consumer)).unwrap();
        let t = d.login("alice", &Password::new("correct horse")).unwrap();
        assert!(d.authenticate(&t.token).is_ok());
        clock.advance(Duration::hours(12) - Duration::seconds(1));
        assert!(d.authenticate(&t.token).is_ok());
        clock.advance(Duration::seconds(1));
        assert!(matches!(d.authenticate(&t.token), Err(Error::Authentication)));
        assert_eq!(d.prune_sessions().unwrap(), 1);
        assert!(matches!(d.authenticate("garbage"), Err(Error::Authentication)));
    }

    #[test]
    fn reset_replaces_the_password_once() {
        let (d, _) = dir();
        let dm = d.create(None, new_user("dm@x.org", "dm", Role::DataManager)).unwrap();
        let u = d.create(None, new_user("alice@x.org", "alice", Role::Consumer)).unwrap();
        let dm = Principal::new(dm.id, Role::DataManager);
        let alice = Principal::new(u.id.clone(), Role::Consumer);
        assert!(matches!(d.issue_reset(&alice, &u.id), Err(Error::Forbidden(_))));
        let r = d.issue_reset(&dm, &u.id).unwrap();
        d.complete_reset(&u.id, &r.reset_token, &Password::new("new secret 1")).unwrap();
        assert!(d.login("alice", &Password::new("new secret 1")).is_ok());
        assert!(d.login("alice", &Password::new("correct horse")).is_err());
        assert!(matches!(
            d.complete_reset(&u.id, &r.reset_token, &Password::new("new secret 2")),
            Err(Error::Authentication)
        ));
    }

    #[test]
    fn update_and_delete_respect_ownership() {
        let (d, _) = dir();
        let dm = d.create(None, new_user("dm@x.org", "dm", Role::DataManager)).unwrap();
        let a = d.create(None, new_user("a@x.org", "a", Role::Consumer)).unwrap();
        let b = d.create(None, new_user("b@x.org", "b", Role::Consumer)).unwrap();
        let pa = Principal::new(a.id.clone(), Role::Consumer);
        let upd = UserUpdate {
            email: Some("a2@x.org".into()),
            ..Default::default()
        };
        assert!(matches!(d.update(&pa, &b.id, upd.clone()), Err(Error::Forbidden(_))));
        assert_eq!(d.update(&pa, &a.id, upd).unwrap().email, "a2@x.org");
        // old email is free again, new one is claimed
        d.create(None, new_user("a@x.org", "a-again", Role::Consumer)).unwrap();
        assert!(matches!(
            d.create(None, new_user("a2@x.org", "zz", Role::Consumer)),
            Err(Error::Conflict(_))
        ));
        let role_change = UserUpdate {
            role: Some(Role::DataManager),
            ..Default::default()
        };
        assert!(matches!(d.update(&pa, &a.id, role_change.clone()), Err(Error::Forbidden(_))));
        let pdm = Principal::new(dm.id, Role::DataManager);
        assert_eq!(d.update(&pdm, &a.id, role_change).unwrap().role, Role::DataManager);

        let t = d.login("b", &Password::new("correct horse")).unwrap();
        d.delete(&pdm, &b.id).unwrap();
        assert!(matches!(d.authenticate(&t.token), Err(Error::Authentication)));
        assert!(matches!(d.get(&b.id), Err(Error::NotFound(_))));
        d.create(None, new_user("b@x.org", "b", Role::Consumer)).unwrap();
    }

    #[test]
    fn debug_output_redacts_passwords() {
        let nu = new_user("a@x.org", "a", Role::Consumer);
        assert!(!format!("{nu:?}").contains("correct horse"));
    }
}
