use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::header::CONTENT_TYPE;
use axum::response::IntoResponse;
use serde_json::json;

use super::auth::{Caller, MaybeCaller};
use super::dto::*;
use super::envelope::{created, ok, ApiError, ApiResult};
use super::validate::{Valid, ValidQuery};
use crate::catalogue::{Collection, FileRecord, Listing};
use crate::governance::{AccessRequest, AuthToken, CredentialInfo, NewUser, UserProfile, Visa};
use crate::ids::{CollectionId, FileId, GrantId, RequestId, TicketId, UserId, VisaId};
use crate::janitor::{ReconcileReport, SweepReport};
use crate::services::{CollectionView, Lakehouse, ResetOutcome, UploadRequest};
use crate::storage::{DownloadGrant, TargetInfo, UploadReceipt, UploadTicket};

type Lake = State<Arc<Lakehouse>>;

pub async fn health() -> ApiResult<serde_json::Value> {
    Ok(ok(json!({ "status": "ok" })))
}

pub async fn login(State(lake): Lake, Valid(body): Valid<Login>) -> ApiResult<AuthToken> {
    Ok(ok(lake.users().login(&body.login, &body.password)?))
}

pub async fn create_user(
    State(lake): Lake,
    MaybeCaller(actor): MaybeCaller,
    Valid(body): Valid<NewUser>,
) -> ApiResult<UserProfile> {
    Ok(created(lake.users().create(actor.as_ref(), body)?))
}

pub async fn update_user(
    State(lake): Lake,
    Caller(actor): Caller,
    Path(id): Path<String>,
    Valid(PatchUser(update)): Valid<PatchUser>,
) -> ApiResult<UserProfile> {
    Ok(ok(lake.users().update(&actor, &UserId::from(id), update)?))
}

pub async fn delete_user(
    State(lake): Lake,
    Caller(actor): Caller,
    Path(id): Path<String>,
) -> ApiResult<serde_json::Value> {
    let id = UserId::from(id);
    lake.users().delete(&actor, &id)?;
    Ok(ok(json!({ "id": id, "deleted": true })))
}

pub async fn password_reset(
    State(lake): Lake,
    MaybeCaller(actor): MaybeCaller,
    Path(id): Path<String>,
    Valid(ResetBody(step)): Valid<ResetBody>,
) -> ApiResult<ResetOutcome> {
    Ok(ok(lake.users().password_reset(actor.as_ref(), &UserId::from(id), step)?))
}

pub async fn list_collections(
    State(lake): Lake,
    Caller(caller): Caller,
    ValidQuery(PageQuery(page)): ValidQuery<PageQuery>,
) -> ApiResult<Listing<Collection>> {
    Ok(ok(lake.catalog().list_collections(&caller, page)?))
}

pub async fn create_collection(
    State(lake): Lake,
    Caller(actor): Caller,
    Valid(body): Valid<CreateCollection>,
) -> ApiResult<Collection> {
    Ok(created(lake.catalog().create_collection(
        &actor,
        &body.name,
        body.storage_type,
        &body.bucket,
    )?))
}

pub async fn show_collection(
    State(lake): Lake,
    Caller(caller): Caller,
    Path(id): Path<String>,
) -> ApiResult<CollectionView> {
    Ok(ok(lake.catalog().show_collection(&caller, &CollectionId::from(id))?))
}

pub async fn list_files(
    State(lake): Lake,
    Caller(caller): Caller,
    Path(id): Path<String>,
    ValidQuery(PageQuery(page)): ValidQuery<PageQuery>,
) -> ApiResult<Listing<FileRecord>> {
    Ok(ok(lake.catalog().list_files(&caller, &CollectionId::from(id), page)?))
}

pub async fn basic_search(
    State(lake): Lake,
    Caller(caller): Caller,
    ValidQuery(q): ValidQuery<KeywordQuery>,
) -> ApiResult<Listing<FileRecord>> {
    Ok(ok(lake.catalog().basic_search(&caller, &q.keyword, q.page)?))
}

pub async fn advanced_search(
    State(lake): Lake,
    Caller(caller): Caller,
    Valid(AdvancedSearch(query)): Valid<AdvancedSearch>,
) -> ApiResult<Listing<FileRecord>> {
    Ok(ok(lake.catalog().advanced_search(&caller, &query)?))
}

pub async fn upload_request(
    State(lake): Lake,
    Caller(actor): Caller,
    Valid(body): Valid<UploadRequest>,
) -> ApiResult<UploadTicket> {
    Ok(created(lake.files().request_upload(&actor, &body)?))
}

pub async fn commit_file(
    State(lake): Lake,
    Caller(actor): Caller,
    Path(id): Path<String>,
    Valid(body): Valid<CommitBody>,
) -> ApiResult<FileRecord> {
    Ok(ok(lake.files().commit(&actor, &FileId::from(id), body.checksum).await?))
}

pub async fn download_url(
    State(lake): Lake,
    Caller(actor): Caller,
    Path(id): Path<String>,
) -> ApiResult<DownloadGrant> {
    Ok(ok(lake.files().download_url(&actor, &FileId::from(id))?))
}

pub async fn list_buckets(State(lake): Lake, Caller(caller): Caller) -> ApiResult<Vec<TargetInfo>> {
    Ok(ok(lake.credentials().list_targets(&caller)?))
}

pub async fn register_bucket(
    State(lake): Lake,
    Caller(actor): Caller,
    Valid(body): Valid<RegisterTarget>,
) -> ApiResult<TargetInfo> {
    Ok(created(lake.credentials().register_target(
        &actor,
        body.storage_type,
        &body.bucket,
        body.credential_id.as_ref(),
    )?))
}

pub async fn add_credential(
    State(lake): Lake,
    Caller(actor): Caller,
    Valid(body): Valid<AddCredential>,
) -> ApiResult<CredentialInfo> {
    Ok(created(lake.credentials().add(
        &actor,
        body.storage_type,
        &body.label,
        &body.secret,
    )?))
}

pub async fn submit_request(
    State(lake): Lake,
    Caller(actor): Caller,
    Valid(body): Valid<SubmitRequest>,
) -> ApiResult<AccessRequest> {
    Ok(created(lake.visas().request_access(&actor, &body.collection_id, body.message)?))
}

pub async fn list_requests(
    State(lake): Lake,
    Caller(caller): Caller,
    ValidQuery(q): ValidQuery<RequestFilter>,
) -> ApiResult<Vec<AccessRequest>> {
    Ok(ok(lake.visas().list_requests(&caller, q.collection.as_ref())?))
}

pub async fn decide_request(
    State(lake): Lake,
    Caller(actor): Caller,
    Path(id): Path<String>,
    Valid(DecisionBody(decision)): Valid<DecisionBody>,
) -> ApiResult<AccessRequest> {
    Ok(ok(lake.visas().decide(&actor, &RequestId::from(id), decision)?))
}

pub async fn grant_visa(
    State(lake): Lake,
    Caller(actor): Caller,
    Path(id): Path<String>,
    Valid(body): Valid<GrantBody>,
) -> ApiResult<Visa> {
    Ok(ok(lake.visas().grant(&actor, &VisaId::from(id), &body.user_id)?))
}

pub async fn revoke_visa(
    State(lake): Lake,
    Caller(actor): Caller,
    Path((id, user)): Path<(String, String)>,
) -> ApiResult<Visa> {
    Ok(ok(lake.visas().revoke(&actor, &VisaId::from(id), &UserId::from(user))?))
}

pub async fn raw_put(State(lake): Lake, Path(id): Path<String>, body: Bytes) -> ApiResult<UploadReceipt> {
    Ok(ok(lake.files().redeem_upload(&TicketId::from(id), body).await?))
}

pub async fn raw_get(State(lake): Lake, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let bytes = lake.files().redeem_download(&GrantId::from(id)).await?;
    Ok(([(CONTENT_TYPE, "application/octet-stream")], bytes))
}

pub async fn janitor_sweep(State(lake): Lake, Caller(actor): Caller) -> ApiResult<SweepReport> {
    Ok(ok(lake.sweep(&actor).await?))
}

pub async fn janitor_reconcile(State(lake): Lake, Caller(actor): Caller) -> ApiResult<ReconcileReport> {
    Ok(ok(lake.reconcile(&actor).await?))
}
