//! Request payloads and their validators.

use super::validate::{Fields, Validate, MAX_TEXT};
use crate::catalogue::{FileCategory, FileQuery, Page};
use crate::governance::{Decision, NewUser, Password, Role, SecretBytes, UserUpdate, MAX_MESSAGE_LEN};
use crate::ids::{CollectionId, CredentialId, UserId};
use crate::services::{PasswordReset, UploadRequest};
use crate::storage::StorageType;

const ID_LEN: usize = 128;

pub struct Login {
    pub login: String,
    pub password: Password,
}

impl Validate for Login {
    fn read(f: &mut Fields) -> Option<Self> {
        let login = f.req_str("login", 254);
        let password = f.req_str("password", Password::MAX_LEN);
        Some(Login {
            login: login?,
            password: Password::new(password?),
        })
    }
}

impl Validate for NewUser {
    fn read(f: &mut Fields) -> Option<Self> {
        let email = f.req_str("email", 254);
        let login = f.req_str("login", 64);
        let password = f.req_str("password", Password::MAX_LEN);
        let role = f.opt_parse::<Role>("role");
        if f.has_error("role") {
            return None;
        }
        Some(NewUser {
            email: email?,
            login: login?,
            password: Password::new(password?),
            role: role.unwrap_or(Role::Consumer),
        })
    }
}

pub struct PatchUser(pub UserUpdate);

impl Validate for PatchUser {
    fn read(f: &mut Fields) -> Option<Self> {
        let email = f.opt_str("email", 254);
        let password = f.opt_str("password", Password::MAX_LEN);
        let role = f.opt_parse::<Role>("role");
        if f.has_errors() {
            return None;
        }
        if email.is_none() && password.is_none() && role.is_none() {
            f.error("body", "at least one of email, password or role is required");
            return None;
        }
        Some(PatchUser(UserUpdate {
            email,
            password: password.map(Password::new),
            role,
        }))
    }
}

pub struct ResetBody(pub PasswordReset);

impl Validate for ResetBody {
    fn read(f: &mut Fields) -> Option<Self> {
        let token = f.opt_str("reset_token", MAX_TEXT);
        let new_password = f.opt_str("new_password", Password::MAX_LEN);
        match (token, new_password) {
            (None, None) => Some(ResetBody(PasswordReset::Issue)),
            (Some(reset_token), Some(p)) => Some(ResetBody(PasswordReset::Complete {
                reset_token,
                new_password: Password::new(p),
            })),
            (Some(_), None) => {
                f.error("new_password", "required together with reset_token");
                None
            }
            (None, Some(_)) => {
                f.error("reset_token", "required together with new_password");
                None
            }
        }
    }
}

pub struct PageQuery(pub Option<Page>);

impl Validate for PageQuery {
    fn read(f: &mut Fields) -> Option<Self> {
        f.page().map(PageQuery)
    }
}

pub struct CreateCollection {
    pub name: String,
    pub storage_type: StorageType,
    pub bucket: String,
}

impl Validate for CreateCollection {
    fn read(f: &mut Fields) -> Option<Self> {
        let name = f.req_str("name", 128);
        let storage_type = f.req_parse("storage_type");
        let bucket = f.req_str("bucket", 128);
        Some(CreateCollection {
            name: name?,
            storage_type: storage_type?,
            bucket: bucket?,
        })
    }
}

pub struct KeywordQuery {
    pub keyword: String,
    pub page: Option<Page>,
}

impl Validate for KeywordQuery {
    fn read(f: &mut Fields) -> Option<Self> {
        let keyword = f.req_str("keyword", 255);
        let page = f.page();
        Some(KeywordQuery {
            keyword: keyword?,
            page: page?,
        })
    }
}

pub struct AdvancedSearch(pub FileQuery);

impl Validate for AdvancedSearch {
    fn read(f: &mut Fields) -> Option<Self> {
        let filters = f.opt_str_list("filters", 16);
        let page = f.page()?;
        let filters = filters.unwrap_or_default();
        match FileQuery::parse(&filters) {
            Ok(mut q) => {
                q.page = page;
                Some(AdvancedSearch(q))
            }
            Err(e) => {
                f.absorb(e);
                None
            }
        }
    }
}

impl Validate for UploadRequest {
    fn read(f: &mut Fields) -> Option<Self> {
        let file_name = f.req_str("file_name", 255);
        let file_category = f.req_parse::<FileCategory>("file_category");
        let collection_id = f.req_str("collection_id", ID_LEN);
        let version = f.opt_uint("version", u32::MAX as u64);
        if f.has_error("version") {
            return None;
        }
        Some(UploadRequest {
            file_name: file_name?,
            file_category: file_category?,
            collection_id: CollectionId::from(collection_id?),
            version: version.map(|v| v as u32),
        })
    }
}

pub struct CommitBody {
    pub checksum: Option<String>,
}

impl Validate for CommitBody {
    fn read(f: &mut Fields) -> Option<Self> {
        let checksum = f.opt_str("checksum", 64);
        if f.has_errors() {
            return None;
        }
        Some(CommitBody { checksum })
    }
}

pub struct RegisterTarget {
    pub storage_type: StorageType,
    pub bucket: String,
    pub credential_id: Option<CredentialId>,
}

impl Validate for RegisterTarget {
    fn read(f: &mut Fields) -> Option<Self> {
        let storage_type = f.req_parse("storage_type");
        let bucket = f.req_str("bucket", 128);
        let credential_id = f.opt_str("credential_id", ID_LEN);
        if f.has_error("credential_id") {
            return None;
        }
        Some(RegisterTarget {
            storage_type: storage_type?,
            bucket: bucket?,
            credential_id: credential_id.map(CredentialId::from),
        })
    }
}

pub struct AddCredential {
    pub storage_type: StorageType,
    pub label: String,
    pub secret: SecretBytes,
}

impl Validate for AddCredential {
    fn read(f: &mut Fields) -> Option<Self> {
        let storage_type = f.req_parse("storage_type");
        let label = f.req_str("label", 128);
        let secret = f.req_str("secret", crate::governance::MAX_SECRET_LEN);
        Some(AddCredential {
            storage_type: storage_type?,
            label: label?,
            secret: SecretBytes::new(secret?.into_bytes()),
        })
    }
}

pub struct SubmitRequest {
    pub collection_id: CollectionId,
    pub message: Option<String>,
}

impl Validate for SubmitRequest {
    fn read(f: &mut Fields) -> Option<Self> {
        let collection_id = f.req_str("collection_id", ID_LEN);
        let message = f.opt_str("message", MAX_MESSAGE_LEN);
        if f.has_error("message") {
            return None;
        }
        Some(SubmitRequest {
            collection_id: CollectionId::from(collection_id?),
            message,
        })
    }
}

pub struct RequestFilter {
    pub collection: Option<CollectionId>,
}

impl Validate for RequestFilter {
    fn read(f: &mut Fields) -> Option<Self> {
        let collection = f.opt_str("collection", ID_LEN);
        if f.has_errors() {
            return None;
        }
        Some(RequestFilter {
            collection: collection.map(CollectionId::from),
        })
    }
}

pub struct DecisionBody(pub Decision);

fn parse_decision(s: &str) -> Result<Decision, String> {
    match s {
        "granted" => Ok(Decision::Granted),
        "denied" => Ok(Decision::Denied),
        other => Err(format!("unknown decision `{other}` (expected granted or denied)")),
    }
}

struct DecisionText(Decision);

impl std::str::FromStr for DecisionText {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_decision(s).map(DecisionText)
    }
}

impl Validate for DecisionBody {
    fn read(f: &mut Fields) -> Option<Self> {
        f.req_parse::<DecisionText>("decision").map(|d| DecisionBody(d.0))
    }
}

pub struct GrantBody {
    pub user_id: UserId,
}

impl Validate for GrantBody {
    fn read(f: &mut Fields) -> Option<Self> {
        f.req_str("user_id", ID_LEN).map(|u| GrantBody {
            user_id: UserId::from(u),
        })
    }
}
