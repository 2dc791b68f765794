use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::users::{Principal, User};
use crate::catalogue::Collection;
use crate::clock::SharedClock;
use crate::error::{Error, Result};
use crate::ids::{CollectionId, UserId, VisaId};
use crate::store::{Batch, Expect, Keyspace, Repository};

/// One grant interval for a user. Records for a user are appended in
/// event order; the last one decides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrantRecord {
    pub user_id: UserId,
    pub granted_at: DateTime<Utc>,
    pub revoked_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visa {
    pub visa_id: VisaId,
    pub collection_id: CollectionId,
    pub issuer_id: UserId,
    pub grants: Vec<GrantRecord>,
}

impl Visa {
    pub fn is_granted(&self, user: &UserId) -> bool {
        &self.issuer_id == user
            || self
                .grants
                .iter()
                .rev()
                .find(|g| &g.user_id == user)
                .is_some_and(|g| g.revoked_at.is_none())
    }

    /// Users whose grant is currently active, owner first.
    pub fn holders(&self) -> Vec<UserId> {
        let mut out = vec![self.issuer_id.clone()];
        for g in &self.grants {
            if !out.contains(&g.user_id) && self.is_granted(&g.user_id) {
                out.push(g.user_id.clone());
            }
        }
        out
    }

    /// Returns false when the user already holds an active grant.
    fn grant(&mut self, user: &UserId, now: DateTime<Utc>) -> bool {
        if self.is_granted(user) {
            return false;
        }
        self.grants.push(GrantRecord {
            user_id: user.clone(),
            granted_at: now,
            revoked_at: None,
        });
        true
    }

    fn revoke(&mut self, user: &UserId, now: DateTime<Utc>) -> bool {
        match self.grants.iter_mut().rev().find(|g| &g.user_id == user) {
            Some(g) if g.revoked_at.is_none() => {
                g.revoked_at = Some(now);
                true
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrantAction {
    Grant,
    Revoke,
}

/// Internal passport broker: issues one visa per collection and records
/// grant and revoke events against it.
#[derive(Debug, Clone)]
pub struct VisaBroker {
    repo: Repository,
    clock: SharedClock,
}

impl VisaBroker {
    pub fn new(repo: Repository, clock: SharedClock) -> Self {
        Self { repo, clock }
    }

    /// Adds a fresh visa for `collection` to `batch`.
    pub fn stage_issue(
        &self,
        batch: &mut Batch,
        collection: &CollectionId,
        owner: &UserId,
    ) -> Visa {
        let visa = Visa {
            visa_id: VisaId::generate(),
            collection_id: collection.clone(),
            issuer_id: owner.clone(),
            grants: Vec::new(),
        };
        batch.insert(Keyspace::Visas, visa.visa_id.as_str(), &visa);
        visa
    }

    pub fn visa(&self, id: &VisaId) -> Result<Visa> {
        self.repo
            .get::<Visa>(Keyspace::Visas, id.as_str())?
            .map(|s| s.value)
            .ok_or_else(|| Error::not_found(format!("visa {id}")))
    }

    fn authorize(actor: &Principal, visa: &Visa) -> Result<()> {
        if actor.is_data_manager() || actor.user_id == visa.issuer_id {
            Ok(())
        } else {
            Err(Error::forbidden("only the collection owner can change its visa"))
        }
    }

    fn require_user(&self, id: &UserId) -> Result<()> {
        if self.repo.get::<User>(Keyspace::Users, id.as_str())?.is_some() {
            Ok(())
        } else {
            Err(Error::not_found(format!("user {id}")))
        }
    }

    /// Grants or revokes `subject`'s access. Repeating the current state is
    /// a no-op. Events on one visa are totally ordered by compare-and-swap.
    pub fn set_grant(
        &self,
        visa_id: &VisaId,
        subject: &UserId,
        action: GrantAction,
        actor: &Principal,
    ) -> Result<Visa> {
        loop {
            let stored = self
                .repo
                .get::<Visa>(Keyspace::Visas, visa_id.as_str())?
                .ok_or_else(|| Error::not_found(format!("visa {visa_id}")))?;
            let mut visa = stored.value;
            Self::authorize(actor, &visa)?;
            if &visa.issuer_id == subject && action == GrantAction::Revoke {
                return Err(Error::invalid("user_id", "the owner's grant cannot be revoked"));
            }
            if action == GrantAction::Grant {
                self.require_user(subject)?;
            }
            let now = self.clock.now();
            let changed = match action {
                GrantAction::Grant => visa.grant(subject, now),
                GrantAction::Revoke => visa.revoke(subject, now),
            };
            if !changed {
                return Ok(visa);
            }
            let mut batch = Batch::new();
            batch.put_if(
                Keyspace::Visas,
                visa_id.as_str(),
                &visa,
                Expect::Revision(stored.revision),
            );
            match self.repo.apply(batch) {
                Ok(_) => return Ok(visa),
                Err(e) if e.is_conflict() => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Adds a grant for `subject` to `batch`, guarded by the visa's current
    /// revision.
    pub(crate) fn stage_grant(
        &self,
        batch: &mut Batch,
        visa_id: &VisaId,
        subject: &UserId,
        now: DateTime<Utc>,
    ) -> Result<Visa> {
        let stored = self
            .repo
            .get::<Visa>(Keyspace::Visas, visa_id.as_str())?
            .ok_or_else(|| Error::not_found(format!("visa {visa_id}")))?;
        let mut visa = stored.value;
        if visa.grant(subject, now) {
            batch.put_if(
                Keyspace::Visas,
                visa_id.as_str(),
                &visa,
                Expect::Revision(stored.revision),
            );
        } else {
            batch.check(Keyspace::Visas, visa_id.as_str(), Expect::Revision(stored.revision));
        }
        Ok(visa)
    }

    /// True iff `who` is a data-manager, owns `collection`, or holds an
    /// active grant on its visa.
    pub fn check_access(&self, who: &Principal, collection: &Collection) -> Result<bool> {
        if who.is_data_manager() || who.user_id == collection.owner_id {
            return Ok(true);
        }
        Ok(self.visa(&collection.visa_id)?.is_granted(&who.user_id))
    }

    pub fn require_access(&self, who: &Principal, collection: &Collection) -> Result<()> {
        if self.check_access(who, collection)? {
            Ok(())
        } else {
            Err(Error::forbidden(format!("no visa grant on collection {}", collection.id)))
        }
    }
}
