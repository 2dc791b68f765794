use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::users::Principal;
use super::visas::VisaBroker;
use crate::catalogue::Collection;
use crate::clock::SharedClock;
use crate::error::{Error, Result};
use crate::ids::{CollectionId, RequestId, UserId};
use crate::store::{Batch, Expect, Keyspace, Repository};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestStatus {
    Pending,
    Granted,
    Denied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Granted,
    Denied,
}

impl From<Decision> for RequestStatus {
    fn from(d: Decision) -> Self {
        match d {
            Decision::Granted => RequestStatus::Granted,
            Decision::Denied => RequestStatus::Denied,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRequest {
    pub request_id: RequestId,
    pub requester_id: UserId,
    pub collection_id: CollectionId,
    pub message: Option<String>,
    pub status: RequestStatus,
    pub created_at: DateTime<Utc>,
    pub decided_by: Option<UserId>,
    pub decided_at: Option<DateTime<Utc>>,
}

pub const MAX_MESSAGE_LEN: usize = 2000;

fn pending_key(user: &UserId, collection: &CollectionId) -> String {
    format!("{user}/{collection}")
}

/// Access requests against collection visas.
#[derive(Debug, Clone)]
pub struct AccessRequests {
    repo: Repository,
    clock: SharedClock,
}

impl AccessRequests {
    pub fn new(repo: Repository, clock: SharedClock) -> Self {
        Self { repo, clock }
    }

    pub fn submit(
        &self,
        requester: &Principal,
        collection: &Collection,
        message: Option<String>,
        broker: &VisaBroker,
    ) -> Result<AccessRequest> {
        if message.as_ref().is_some_and(|m| m.chars().count() > MAX_MESSAGE_LEN) {
            return Err(Error::invalid("message", format!("at most {MAX_MESSAGE_LEN} characters")));
        }
        if broker.check_access(requester, collection)? {
            return Err(Error::conflict("requester already has access to this collection"));
        }
        let request = AccessRequest {
            request_id: RequestId::generate(),
            requester_id: requester.user_id.clone(),
            collection_id: collection.id.clone(),
            message,
            status: RequestStatus::Pending,
            created_at: self.clock.now(),
            decided_by: None,
            decided_at: None,
        };
        let mut batch = Batch::new();
        batch
            .insert(
                Keyspace::RequestIndex,
                pending_key(&request.requester_id, &request.collection_id),
                &request.request_id,
            )
            .insert(Keyspace::Requests, request.request_id.as_str(), &request);
        match self.repo.apply(batch) {
            Ok(_) => Ok(request),
            Err(e) if e.is_conflict() => Err(Error::conflict(
                "a pending request for this collection already exists",
            )),
            Err(e) => Err(e.into()),
        }
    }

    pub fn get(&self, id: &RequestId) -> Result<AccessRequest> {
        self.repo
            .get::<AccessRequest>(Keyspace::Requests, id.as_str())?
            .map(|s| s.value)
            .ok_or_else(|| Error::not_found(format!("access request {id}")))
    }

    /// With a collection: every request on it, for its owner or a
    /// data-manager. Without: the caller's own requests.
    pub fn list(&self, caller: &Principal, collection: Option<&Collection>) -> Result<Vec<AccessRequest>> {
        if let Some(c) = collection {
            if !(caller.is_data_manager() || caller.user_id == c.owner_id) {
                return Err(Error::forbidden("only the collection owner can list its requests"));
            }
        }
        let mut out: Vec<AccessRequest> = self
            .repo
            .scan::<AccessRequest>(Keyspace::Requests, "")?
            .into_iter()
            .map(|s| s.value)
            .filter(|r| match collection {
                Some(c) => r.collection_id == c.id,
                None => r.requester_id == caller.user_id,
            })
            .collect();
        out.sort_by(|a, b| (a.created_at, &a.request_id).cmp(&(b.created_at, &b.request_id)));
        Ok(out)
    }

    /// Settles a pending request. A grant updates the collection's visa in
    /// the same write.
    pub fn decide(
        &self,
        actor: &Principal,
        id: &RequestId,
        decision: Decision,
        collection: &Collection,
        broker: &VisaBroker,
    ) -> Result<AccessRequest> {
        loop {
            let stored = self
                .repo
                .get::<AccessRequest>(Keyspace::Requests, id.as_str())?
                .ok_or_else(|| Error::not_found(format!("access request {id}")))?;
            let mut request = stored.value;
            if request.collection_id != collection.id {
                return Err(Error::invalid("collection_id", "request belongs to another collection"));
            }
            if !(actor.is_data_manager() || actor.user_id == collection.owner_id) {
                return Err(Error::forbidden("only the collection owner can decide requests"));
            }
            if request.status != RequestStatus::Pending {
                return Err(Error::conflict(format!("request {id} was already decided")));
            }
            let now = self.clock.now();
            request.status = decision.into();
            request.decided_by = Some(actor.user_id.clone());
            request.decided_at = Some(now);
            let mut batch = Batch::new();
            batch
                .put_if(Keyspace::Requests, id.as_str(), &request, Expect::Revision(stored.revision))
                .delete(
                    Keyspace::RequestIndex,
                    pending_key(&request.requester_id, &request.collection_id),
                );
            if decision == Decision::Granted {
                broker.stage_grant(&mut batch, &collection.visa_id, &request.requester_id, now)?;
            }
            match self.repo.apply(batch) {
                Ok(_) => return Ok(request),
                Err(e) if e.is_conflict() => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }
}
