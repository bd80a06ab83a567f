//! Fixed-capacity circular FIFO.

/// Records held by an end-point buffer.
pub const ENDPOINT_BUFFER_CAPACITY: usize = 600;

/// Circular FIFO that evicts its oldest element when full.
#[derive(Debug, Clone)]
pub struct RingBuffer<T> {
    storage: Vec<T>,
    /// Index of the oldest element once `storage` has reached capacity.
    head: usize,
    capacity: usize,
}

impl<T> RingBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "ring buffer capacity must be positive");
        Self {
            storage: Vec::with_capacity(capacity),
            head: 0,
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.storage.len() == self.capacity
    }

    /// Appends `item`, returning the evicted oldest element when the buffer was full.
    pub fn push(&mut self, item: T) -> Option<T> {
        if self.storage.len() < self.capacity {
            self.storage.push(item);
            None
        } else {
            let old = std::mem::replace(&mut self.storage[self.head], item);
            self.head = (self.head + 1) % self.capacity;
            Some(old)
        }
    }

    /// Most recently pushed element.
    pub fn latest(&self) -> Option<&T> {
        if self.storage.is_empty() {
            None
        } else if self.is_full() {
            Some(&self.storage[(self.head + self.capacity - 1) % self.capacity])
        } else {
            self.storage.last()
        }
    }

    pub fn oldest(&self) -> Option<&T> {
        if self.is_full() {
            self.storage.get(self.head)
        } else {
            self.storage.first()
        }
    }

    /// Elements from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        let (newer, older) = if self.is_full() {
            self.storage.split_at(self.head)
        } else {
            self.storage.split_at(0)
        };
        older.iter().chain(newer.iter())
    }

    pub fn clear(&mut self) {
        self.storage.clear();
        self.head = 0;
    }
}

impl<T> Default for RingBuffer<T> {
    fn default() -> Self {
        Self::new(ENDPOINT_BUFFER_CAPACITY)
    }
}
