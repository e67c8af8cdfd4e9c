//! Time-ordered check-in log with indexed history queries.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{Checkin, LocationLayout};

/// Filter for [`EventLog::filtration`]. `None` fields are wildcards.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Filter {
    pub user: Option<usize>,
    pub category: Option<usize>,
    pub location: Option<usize>,
    /// Drop events of this user (the "all users but u" history).
    pub exclude_user: Option<usize>,
}

impl Filter {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn user(mut self, u: usize) -> Self {
        self.user = Some(u);
        self
    }

    pub fn category(mut self, c: usize) -> Self {
        self.category = Some(c);
        self
    }

    pub fn location(mut self, l: usize) -> Self {
        self.location = Some(l);
        self
    }

    pub fn exclude_user(mut self, u: usize) -> Self {
        self.exclude_user = Some(u);
        self
    }

    fn matches(&self, e: &Checkin) -> bool {
        self.user.is_none_or(|u| e.user == u)
            && self.category.is_none_or(|c| e.category == c)
            && self.location.is_none_or(|l| e.location == l)
            && self.exclude_user.is_none_or(|u| e.user != u)
    }
}

/// Observed check-ins on `[0, horizon)`.
///
/// Events are kept sorted by time; simultaneous events keep their input
/// order. Per-user, per-(user, category), per-category, per-location and
/// per-(user, location) indices make history queries a binary search.
#[derive(Debug, Clone)]
pub struct EventLog {
    events: Vec<Checkin>,
    n_users: usize,
    layout: LocationLayout,
    horizon: f64,
    by_user: Vec<Vec<usize>>,
    by_user_category: Vec<Vec<usize>>,
    by_category: Vec<Vec<usize>>,
    by_location: Vec<Vec<usize>>,
    by_user_location: HashMap<(usize, usize), Vec<usize>>,
    user_category_times: Vec<Vec<f64>>,
}

impl EventLog {
    pub fn new(
        n_users: usize,
        layout: LocationLayout,
        mut events: Vec<Checkin>,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::invalid(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        for (i, e) in events.iter().enumerate() {
            if !(e.t.is_finite() && e.t >= 0.0) {
                return Err(Error::invalid(format!("event {i}: time {} is not >= 0", e.t)));
            }
            if e.t >= horizon {
                return Err(Error::invalid(format!(
                    "event {i}: time {} is not before the horizon {horizon}",
                    e.t
                )));
            }
            if e.user >= n_users {
                return Err(Error::invalid(format!("event {i}: user {} >= N={n_users}", e.user)));
            }
            if e.location >= layout.n_locations() {
                return Err(Error::invalid(format!(
                    "event {i}: location {} >= L={}",
                    e.location,
                    layout.n_locations()
                )));
            }
            if layout.category_of(e.location) != e.category {
                return Err(Error::invalid(format!(
                    "event {i}: location {} belongs to category {}, not {}",
                    e.location,
                    layout.category_of(e.location),
                    e.category
                )));
            }
        }
        // stable: ties keep input order
        events.sort_by(|a, b| a.t.total_cmp(&b.t));

        let n_cat = layout.n_categories();
        let mut by_user = vec![Vec::new(); n_users];
        let mut by_user_category = vec![Vec::new(); n_users * n_cat];
        let mut by_category = vec![Vec::new(); n_cat];
        let mut by_location = vec![Vec::new(); layout.n_locations()];
        let mut by_user_location: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut user_category_times = vec![Vec::new(); n_users * n_cat];
        for (i, e) in events.iter().enumerate() {
            by_user[e.user].push(i);
            by_user_category[e.user * n_cat + e.category].push(i);
            user_category_times[e.user * n_cat + e.category].push(e.t);
            by_category[e.category].push(i);
            by_location[e.location].push(i);
            by_user_location.entry((e.user, e.location)).or_default().push(i);
        }
        Ok(Self {
            events,
            n_users,
            layout,
            horizon,
            by_user,
            by_user_category,
            by_category,
            by_location,
            by_user_location,
            user_category_times,
        })
    }

    pub fn empty(n_users: usize, layout: LocationLayout, horizon: f64) -> Result<Self> {
        Self::new(n_users, layout, Vec::new(), horizon)
    }

    pub fn events(&self) -> &[Checkin] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_categories(&self) -> usize {
        self.layout.n_categories()
    }

    pub fn n_locations(&self) -> usize {
        self.layout.n_locations()
    }

    pub fn layout(&self) -> &LocationLayout {
        &self.layout
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Sorted times of the events of user `u` in category `c`.
    pub fn user_category_times(&self, u: usize, c: usize) -> &[f64] {
        &self.user_category_times[u * self.n_categories() + c]
    }

    /// Indices (into [`events`](Self::events)) of the events of user `u`.
    pub fn user_event_indices(&self, u: usize) -> &[usize] {
        &self.by_user[u]
    }

    /// Events strictly before `t` that match `filter`, in time order.
    pub fn filtration(&self, t: f64, filter: &Filter) -> Result<Vec<Checkin>> {
        if t.is_nan() || t > self.horizon {
            return Err(Error::invalid(format!(
                "query time {t} is after the horizon {}",
                self.horizon
            )));
        }
        let check = |id: Option<usize>, bound: usize, what: &str| -> Result<()> {
            match id {
                Some(x) if x >= bound => Err(Error::invalid(format!("{what} {x} out of range 0..{bound}"))),
                _ => Ok(()),
            }
        };
        check(filter.user, self.n_users, "user")?;
        check(filter.exclude_user, self.n_users, "user")?;
        check(filter.category, self.n_categories(), "category")?;
        check(filter.location, self.n_locations(), "location")?;

        let empty = Vec::new();
        let index: &[usize] = match (filter.user, filter.category, filter.location) {
            (Some(u), _, Some(l)) => self.by_user_location.get(&(u, l)).unwrap_or(&empty),
            (Some(u), Some(c), None) => &self.by_user_category[u * self.n_categories() + c],
            (Some(u), None, None) => &self.by_user[u],
            (None, _, Some(l)) => &self.by_location[l],
            (None, Some(c), None) => &self.by_category[c],
            (None, None, None) => {
                let end = self.events.partition_point(|e| e.t < t);
                return Ok(self.events[..end]
                    .iter()
                    .filter(|e| filter.matches(e))
                    .copied()
                    .collect());
            }
        };
        let end = index.partition_point(|&i| self.events[i].t < t);
        Ok(index[..end]
            .iter()
            .map(|&i| self.events[i])
            .filter(|e| filter.matches(e))
            .collect())
    }

    /// The first `n` events. The horizon becomes the time of event `n`, or
    /// stays unchanged when `n` covers the whole log.
    pub fn head(&self, n: usize) -> Result<EventLog> {
        if n > self.len() {
            return Err(Error::invalid(format!("head({n}) of a log with {} events", self.len())));
        }
        let horizon = if n == self.len() {
            self.horizon
        } else {
            self.events[n].t
        };
        if n > 0 && n < self.len() && self.events[n - 1].t >= horizon {
            return Err(Error::invalid(format!(
                "cannot cut the log between simultaneous events at t={horizon}"
            )));
        }
        EventLog::new(self.n_users, self.layout.clone(), self.events[..n].to_vec(), horizon)
    }

    /// Train/test split by time: the first `floor(K * train_fraction)` events
    /// train, the rest test. Train ends at the first test event; test keeps
    /// the original horizon and all ids.
    pub fn split(&self, train_fraction: f64) -> Result<(EventLog, EventLog)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        if self.len() < 2 {
            return Err(Error::invalid("cannot split a log with fewer than 2 events"));
        }
        let n_train = (self.len() as f64 * train_fraction).floor() as usize;
        let train = self.head(n_train)?;
        let test = EventLog::new(
            self.n_users,
            self.layout.clone(),
            self.events[n_train..].to_vec(),
            self.horizon,
        )?;
        Ok((train, test))
    }

    /// Same events with a different observation end.
    pub fn with_horizon(&self, horizon: f64) -> Result<EventLog> {
        EventLog::new(self.n_users, self.layout.clone(), self.events.clone(), horizon)
    }
}
