use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::config::SimulationConfig;
use super::metrics::{ContentMetrics, MetricsReport, NodeMetrics, TraceRecord};
use crate::cache::{build_cache, CachePolicy, CacheSpec, Lookup, PolicyKind, WindowSettings};
use crate::topology::Topology;
use crate::window::{estimate_window, wlfu_window};
use crate::workload::{PopularityModel, RequestEvent, RequestProcess, RequestStream};
use crate::{ContentId, NodeId, Result};

/// Where consumer requests come from.
#[derive(Debug, Clone)]
pub enum RequestSource {
    /// Independent Poisson streams at every node, rates drawn from the
    /// configured range.
    Poisson,
    /// A fixed list of requests, in time order.
    Trace(Vec<RequestEvent>),
}

/// Consumer arrival rate of every node, drawn uniformly from
/// `[lambda_min, lambda_max]` with the run seed.
pub fn direct_rates(config: &SimulationConfig, nodes: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(u64::MAX);
    (0..nodes)
        .map(|_| {
            if config.lambda_max > config.lambda_min {
                rng.random_range(config.lambda_min..config.lambda_max)
            } else {
                config.lambda_min
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum Face {
    Consumer {
        issued: f64,
        measured: bool,
        rank: ContentId,
    },
    Neighbor(NodeId),
}

#[derive(Debug)]
struct Pending {
    faces: Vec<Face>,
    first_miss: f64,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Consumer {
        content: ContentId,
    },
    Interest {
        content: ContentId,
        face: Face,
        measured: bool,
    },
    Data {
        content: ContentId,
        from_cache: bool,
    },
}

#[derive(Debug)]
struct Scheduled {
    time: f64,
    node: NodeId,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed so that the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.node.cmp(&self.node))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Engine<'a> {
    topology: &'a Topology,
    caches: Vec<Box<dyn CachePolicy>>,
    pit: Vec<HashMap<ContentId, Pending>>,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    nodes: Vec<NodeMetrics>,
    contents: Vec<ContentMetrics>,
    trace: Option<Vec<TraceRecord>>,
    delay_sum: f64,
    delivered: u64,
    first_hop_hits: u64,
    cache_served: u64,
    events: u64,
}

impl Engine<'_> {
    fn schedule(&mut self, time: f64, node: NodeId, kind: Kind) {
        self.seq += 1;
        self.queue.push(Scheduled {
            time,
            node,
            seq: self.seq,
            kind,
        });
    }

    fn log(&mut self, time: f64, node: NodeId, content: ContentId, action: &'static str) {
        if let Some(t) = &mut self.trace {
            t.push(TraceRecord {
                time,
                node,
                content,
                action,
            });
        }
    }

    fn deliver(
        &mut self,
        face: Face,
        node: NodeId,
        content: ContentId,
        now: f64,
        from_cache: bool,
        first_hop: bool,
    ) {
        match face {
            Face::Consumer {
                issued,
                measured,
                rank,
            } => {
                if measured {
                    self.delay_sum += now - issued;
                    self.delivered += 1;
                    self.cache_served += u64::from(from_cache);
                    self.first_hop_hits += u64::from(first_hop);
                    if let Some(c) = self.contents.get_mut(rank as usize - 1) {
                        c.requests += 1;
                        c.first_hits += u64::from(first_hop);
                    }
                }
            }
            Face::Neighbor(down) => {
                let d = self
                    .topology
                    .graph()
                    .edge_delay(node, down)
                    .expect("faces are neighbours");
                self.schedule(
                    now + d,
                    down,
                    Kind::Data {
                        content,
                        from_cache,
                    },
                );
            }
        }
    }

    fn interest(
        &mut self,
        node: NodeId,
        content: ContentId,
        face: Face,
        measured: bool,
        now: f64,
    ) -> Result<()> {
        let stats = &mut self.nodes[node];
        if measured {
            stats.arrivals += 1;
            stats.from_neighbors += u64::from(matches!(face, Face::Neighbor(_)));
        }
        match self.caches[node].on_request(content, now) {
            Lookup::Hit => {
                if measured {
                    self.nodes[node].hits += 1;
                }
                self.log(now, node, content, "hit");
                let first_hop = matches!(face, Face::Consumer { .. });
                self.deliver(face, node, content, now, true, first_hop);
            }
            Lookup::Miss => {
                if measured {
                    self.nodes[node].misses += 1;
                }
                if let Some(p) = self.pit[node].get_mut(&content) {
                    p.faces.push(face);
                    if measured {
                        self.nodes[node].coalesced += 1;
                    }
                    self.log(now, node, content, "coalesce");
                    return Ok(());
                }
                self.pit[node].insert(
                    content,
                    Pending {
                        faces: vec![face],
                        first_miss: now,
                    },
                );
                if measured {
                    self.nodes[node].forwarded += 1;
                }
                match self.topology.next_hop(node, content)? {
                    Some(up) => {
                        self.log(now, node, content, "forward");
                        let d = self
                            .topology
                            .graph()
                            .edge_delay(node, up)
                            .expect("routes follow edges");
                        self.schedule(
                            now + d,
                            up,
                            Kind::Interest {
                                content,
                                face: Face::Neighbor(node),
                                measured,
                            },
                        );
                    }
                    None => {
                        self.log(now, node, content, "publisher");
                        let rtt = 2.0 * self.topology.publisher_delay();
                        self.schedule(
                            now + rtt,
                            node,
                            Kind::Data {
                                content,
                                from_cache: false,
                            },
                        );
                    }
                }
            }
        }
        Ok(())
    }

    fn data(&mut self, node: NodeId, content: ContentId, from_cache: bool, now: f64) {
        let Some(pending) = self.pit[node].remove(&content) else {
            return;
        };
        let cache = &mut self.caches[node];
        cache.observe_miss_delay(now - pending.first_miss);
        if !cache.contains(content) {
            let decision = cache.admit(content, now);
            if decision.stored() {
                self.nodes[node].insertions += 1;
                self.log(now, node, content, "store");
            } else {
                self.log(now, node, content, "pass");
            }
            if let Some(ev) = decision.evicted() {
                self.nodes[node].evictions += 1;
                self.log(now, node, ev, "evict");
            }
        }
        for face in pending.faces {
            self.deliver(face, node, content, now, from_cache, false);
        }
    }
}

/// Builds one node's cache for the run.
fn node_cache(
    config: &SimulationConfig,
    model: &PopularityModel,
    node: NodeId,
    rate: f64,
) -> Result<Box<dyn CachePolicy>> {
    let mut spec = CacheSpec::new(config.policy, config.capacity);
    spec.seed = config.seed ^ (node as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    match config.policy {
        PolicyKind::Lfru => {
            let w = &config.window;
            let est = estimate_window(
                w.method,
                w.epsilon,
                w.conf,
                model,
                rate.max(f64::MIN_POSITIVE),
                0.0,
            )?;
            spec.lfru = config.lfru.clone();
            spec.lfru.window = WindowSettings {
                w_requests: w.adaptive.then_some(est.w_requests),
                w_time: Some(w.w_time.unwrap_or(est.w_time)),
            };
        }
        PolicyKind::Wlfu => {
            spec.wlfu_window = wlfu_window(
                config.capacity as u64,
                model.catalog_size() as u64,
                config.window.epsilon,
            )?;
        }
        _ => {}
    }
    build_cache(&spec)
}

/// Runs one simulation on a prebuilt topology.
pub fn run_on(
    config: &SimulationConfig,
    topology: &Topology,
    source: RequestSource,
) -> Result<MetricsReport> {
    config.validate()?;
    let model = PopularityModel::new(config.alpha, topology.catalog_size())?;
    let n = topology.node_count();
    let rates = direct_rates(config, n);

    let caches = (0..n)
        .map(|j| node_cache(config, &model, j, rates[j]))
        .collect::<Result<Vec<_>>>()?;
    let window_requests = caches[0].window_requests();

    let mut engine = Engine {
        topology,
        caches,
        pit: (0..n).map(|_| HashMap::new()).collect(),
        queue: BinaryHeap::new(),
        seq: 0,
        nodes: (0..n)
            .map(|j| NodeMetrics {
                node: j,
                direct_rate: rates[j],
                ..NodeMetrics::default()
            })
            .collect(),
        contents: (1..=config.content_stats.min(topology.catalog_size()))
            .map(|rank| ContentMetrics {
                rank,
                ..ContentMetrics::default()
            })
            .collect(),
        trace: config.trace.then(Vec::new),
        delay_sum: 0.0,
        delivered: 0,
        first_hop_hits: 0,
        cache_served: 0,
        events: 0,
    };

    let (budget, mut streams, trace_requests) = match source {
        RequestSource::Poisson => {
            let streams: Vec<RequestStream> = rates
                .iter()
                .enumerate()
                .map(|(j, &r)| {
                    RequestProcess::per_request_slot(r, config.seed)
                        .map(|p| RequestStream::new(&p, j))
                })
                .collect::<Result<_>>()?;
            (config.requests, streams, Vec::new())
        }
        RequestSource::Trace(events) => (events.len() as u64, Vec::new(), events),
    };
    for (j, s) in streams.iter_mut().enumerate() {
        if let Some(ev) = s.next_event(&model) {
            engine.schedule(
                ev.time,
                j,
                Kind::Consumer {
                    content: ev.content,
                },
            );
        }
    }
    let mut trace_iter = trace_requests.into_iter();
    let mut push_trace = |engine: &mut Engine| {
        if let Some(ev) = trace_iter.next() {
            engine.schedule(
                ev.time,
                ev.origin_node,
                Kind::Consumer {
                    content: ev.content,
                },
            );
        }
    };
    push_trace(&mut engine);

    let warm_index = (config.warmup_fraction * budget as f64).floor() as u64;
    let mut issued = 0u64;
    let mut checksum = Sha256::new();
    let (mut t_warm, mut t_end) = (0.0, 0.0);

    while let Some(ev) = engine.queue.pop() {
        match ev.kind {
            Kind::Consumer { content, .. } => {
                if issued >= budget {
                    continue;
                }
                if content == 0 || content > topology.catalog_size() {
                    return Err(crate::Error::Config(format!(
                        "request for unknown content {content}"
                    )));
                }
                let index = issued;
                issued += 1;
                engine.events += 1;
                checksum.update(ev.time.to_bits().to_le_bytes());
                checksum.update((ev.node as u64).to_le_bytes());
                checksum.update(content.to_le_bytes());
                if index == warm_index {
                    t_warm = ev.time;
                }
                t_end = ev.time;
                if streams.is_empty() {
                    push_trace(&mut engine);
                } else if let Some(next) = streams[ev.node].next_event(&model) {
                    engine.schedule(
                        next.time,
                        ev.node,
                        Kind::Consumer {
                            content: next.content,
                        },
                    );
                }
                let measured = index >= warm_index;
                let face = Face::Consumer {
                    issued: ev.time,
                    measured,
                    rank: content,
                };
                engine.interest(ev.node, content, face, measured, ev.time)?;
            }
            Kind::Interest {
                content,
                face,
                measured,
            } => {
                engine.events += 1;
                engine.interest(ev.node, content, face, measured, ev.time)?;
            }
            Kind::Data {
                content,
                from_cache,
            } => {
                engine.events += 1;
                engine.data(ev.node, content, from_cache, ev.time);
            }
        }
    }

    let measurement_time = t_end - t_warm;
    let per_second = |x: u64| {
        if measurement_time > 0.0 {
            x as f64 / measurement_time
        } else {
            0.0
        }
    };
    let (mut arrivals, mut hits, mut insertions) = (0u64, 0u64, 0u64);
    for (j, m) in engine.nodes.iter_mut().enumerate() {
        m.hit_probability = if m.arrivals > 0 {
            m.hits as f64 / m.arrivals as f64
        } else {
            0.0
        };
        m.forwarded_rate = per_second(m.forwarded);
        m.received_rate = per_second(m.from_neighbors);
        m.window_requests = engine.caches[j].window_requests();
        m.window_time = engine.caches[j].window_time();
        arrivals += m.arrivals;
        hits += m.hits;
        insertions += m.insertions;
    }
    for c in &mut engine.contents {
        c.hit_probability = if c.requests > 0 {
            c.first_hits as f64 / c.requests as f64
        } else {
            0.0
        };
    }
    let delivered = engine.delivered.max(1) as f64;
    Ok(MetricsReport {
        policy: config.policy,
        capacity: config.capacity,
        alpha: config.alpha,
        seed: config.seed,
        config_hash: config.config_hash(),
        stream_checksum: checksum
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect(),
        requests_issued: issued,
        measured_requests: engine.delivered,
        measurement_time,
        events_processed: engine.events,
        hit_probability: if arrivals > 0 {
            hits as f64 / arrivals as f64
        } else {
            0.0
        },
        first_hop_hit_probability: engine.first_hop_hits as f64 / delivered,
        network_hit_probability: engine.cache_served as f64 / delivered,
        mean_delay: engine.delay_sum / delivered,
        insertions,
        window_requests,
        nodes: engine.nodes,
        contents: engine.contents,
        trace: engine.trace,
    })
}

/// Builds the topology from the config and runs Poisson traffic on it.
pub fn run(config: &SimulationConfig) -> Result<MetricsReport> {
    config.validate()?;
    let topology = Topology::build(&config.topology)?;
    run_on(config, &topology, RequestSource::Poisson)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{che_characteristic_time, content_hit_prob};
    use crate::sim::run_sweep;
    use crate::topology::{Graph, TopologyParams};

    fn line(nodes: usize, delay: f64, items: u32) -> (Topology, TopologyParams) {
        let params = TopologyParams {
            nodes: nodes.max(2),
            attach: 1,
            publishers: 1,
            items_per_publisher: items,
            hop_delay: delay,
            ..TopologyParams::default()
        };
        let mut g = Graph::new(nodes);
        for u in 1..nodes {
            g.add_edge(u - 1, u, delay).unwrap();
        }
        (Topology::from_graph(g, &params).unwrap(), params)
    }

    fn small(policy: PolicyKind, capacity: usize) -> SimulationConfig {
        SimulationConfig {
            topology: TopologyParams {
                nodes: 12,
                attach: 2,
                publishers: 2,
                items_per_publisher: 150,
                ..TopologyParams::default()
            },
            policy,
            capacity,
            requests: 20_000,
            ..SimulationConfig::default()
        }
    }

    fn at(time: f64, node: NodeId, content: ContentId) -> RequestEvent {
        RequestEvent {
            time,
            origin_node: node,
            content,
        }
    }

    #[test]
    fn hand_trace_lru() {
        let (topo, params) = line(1, 0.01, 3);
        let config = SimulationConfig {
            topology: params,
            policy: PolicyKind::Lru,
            capacity: 1,
            warmup_fraction: 0.0,
            trace: true,
            ..SimulationConfig::default()
        };
        let reqs = vec![at(1.0, 0, 1), at(2.0, 0, 1), at(3.0, 0, 2), at(4.0, 0, 1)];
        let r = run_on(&config, &topo, RequestSource::Trace(reqs)).unwrap();
        let n = &r.nodes[0];
        assert_eq!(
            (n.arrivals, n.hits, n.forwarded, n.insertions, n.evictions),
            (4, 1, 3, 3, 2)
        );
        assert_eq!(r.hit_probability, 0.25);
        // Three publisher round trips of 20 ms over four requests.
        assert!((r.mean_delay - 0.015).abs() < 1e-12);
        let actions: Vec<_> = r.trace.unwrap().iter().map(|t| t.action).collect();
        assert_eq!(
            actions,
            [
                "publisher",
                "store",
                "hit",
                "publisher",
                "store",
                "evict",
                "publisher",
                "store",
                "evict"
            ]
        );
    }

    #[test]
    fn pending_requests_coalesce() {
        let (topo, params) = line(2, 0.5, 2);
        let config = SimulationConfig {
            topology: params,
            policy: PolicyKind::Lru,
            capacity: 1,
            warmup_fraction: 0.0,
            ..SimulationConfig::default()
        };
        // Publisher sits on node 0; node 1 is one 0.5 s hop away.
        let reqs = vec![at(1.0, 1, 1), at(1.1, 1, 1), at(1.2, 0, 1)];
        let r = run_on(&config, &topo, RequestSource::Trace(reqs)).unwrap();
        let (a, b) = (&r.nodes[0], &r.nodes[1]);
        assert_eq!((b.arrivals, b.forwarded, b.coalesced), (3 - 1, 1, 1));
        assert_eq!(
            (a.arrivals, a.from_neighbors, a.forwarded, a.coalesced),
            (2, 1, 1, 1)
        );
        // Node 0 misses first at 1.2 and the neighbour's interest, arriving
        // at 1.5, joins it; data reaches node 0 at 2.2 and node 1 at 2.7.
        let expected = ((2.7 - 1.0) + (2.7 - 1.1) + (2.2 - 1.2)) / 3.0;
        assert!((r.mean_delay - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_capacity_never_hits() {
        let r = run(&small(PolicyKind::Lru, 0)).unwrap();
        assert_eq!(r.hit_probability, 0.0);
        assert_eq!(r.insertions, 0);
        assert!(r.mean_delay > 0.0);
    }

    #[test]
    fn whole_catalog_fits() {
        for policy in PolicyKind::ALL {
            let r = run(&small(policy, 300)).unwrap();
            for n in &r.nodes {
                assert_eq!(n.evictions, 0, "{policy:?}");
                assert!(n.insertions <= 300);
            }
        }
    }

    #[test]
    fn flows_balance() {
        for policy in PolicyKind::ALL {
            let r = run(&small(policy, 15)).unwrap();
            let mut received = 0;
            let mut forwarded = 0;
            for n in &r.nodes {
                assert_eq!(n.arrivals, n.hits + n.misses, "{policy:?}");
                assert_eq!(n.misses, n.forwarded + n.coalesced, "{policy:?}");
                received += n.from_neighbors;
                forwarded += n.forwarded;
            }
            assert!(received <= forwarded);
        }
    }

    #[test]
    fn three_node_path_flows() {
        // With zero delays nothing is ever pending, so every miss travels on.
        let (topo, params) = line(3, 0.0, 100);
        let config = SimulationConfig {
            topology: params,
            policy: PolicyKind::Lru,
            capacity: 10,
            requests: 30_000,
            ..SimulationConfig::default()
        };
        let r = run_on(&config, &topo, RequestSource::Poisson).unwrap();
        let n = &r.nodes;
        for m in n {
            assert_eq!(m.coalesced, 0);
            let expected = m.arrivals as f64 * (1.0 - m.hit_probability) / r.measurement_time;
            assert!((m.forwarded_rate - expected).abs() < 1e-9 * expected.max(1.0));
        }
        // The publisher attaches to the middle node.
        assert_eq!(topo.publishers()[0].attachment, 1);
        assert_eq!(n[1].from_neighbors, n[0].forwarded + n[2].forwarded);
        assert_eq!(n[0].from_neighbors + n[2].from_neighbors, 0);
    }

    #[test]
    fn reproducible() {
        let c = small(PolicyKind::Lfru, 20);
        assert_eq!(run(&c).unwrap(), run(&c).unwrap());
        let mut d = c.clone();
        d.seed = 9;
        assert_ne!(
            run(&c).unwrap().stream_checksum,
            run(&d).unwrap().stream_checksum
        );
    }

    #[test]
    fn policies_see_same_requests() {
        let sums: Vec<String> = PolicyKind::ALL
            .iter()
            .map(|&p| run(&small(p, 20)).unwrap().stream_checksum)
            .collect();
        assert!(sums.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn clce_stores_less_than_lce() {
        let lfru = run(&small(PolicyKind::Lfru, 20)).unwrap();
        let lru = run(&small(PolicyKind::Lru, 20)).unwrap();
        assert!(
            lfru.insertions <= lru.insertions,
            "{} > {}",
            lfru.insertions,
            lru.insertions
        );
    }

    #[test]
    fn sweep_order_and_topology() {
        let base = small(PolicyKind::Lru, 10);
        let out = run_sweep(&base, &[5, 10], &[0.8], &[PolicyKind::Lru, PolicyKind::Lfu]).unwrap();
        let keys: Vec<_> = out.iter().map(|r| (r.capacity, r.policy)).collect();
        assert_eq!(
            keys,
            [
                (5, PolicyKind::Lru),
                (5, PolicyKind::Lfu),
                (10, PolicyKind::Lru),
                (10, PolicyKind::Lfu)
            ]
        );
        assert_eq!(out[2], run(&base).unwrap());
    }

    #[test]
    fn single_lru_matches_che() {
        let (topo, params) = line(1, 0.0, 200);
        let config = SimulationConfig {
            topology: params,
            policy: PolicyKind::Lru,
            capacity: 20,
            requests: 200_000,
            content_stats: 10,
            ..SimulationConfig::default()
        };
        let r = run_on(&config, &topo, RequestSource::Poisson).unwrap();
        let model = PopularityModel::new(0.8, 200).unwrap();
        let p = model.probabilities();
        let t = che_characteristic_time(20.0, p)
            .unwrap()
            .characteristic_time;
        let theory: f64 = p.iter().map(|&v| v * content_hit_prob(v, t)).sum();
        assert!(
            (r.hit_probability - theory).abs() < 0.01,
            "{} vs {theory}",
            r.hit_probability
        );
        for c in &r.contents {
            let h = content_hit_prob(p[c.rank as usize - 1], t);
            assert!(
                (c.hit_probability - h).abs() < 0.03,
                "rank {}: {} vs {h}",
                c.rank,
                c.hit_probability
            );
        }
    }

    #[test]
    fn unknown_content_in_trace() {
        let (topo, params) = line(1, 0.01, 3);
        let config = SimulationConfig {
            topology: params,
            ..SimulationConfig::default()
        };
        assert!(run_on(&config, &topo, RequestSource::Trace(vec![at(1.0, 0, 4)])).is_err());
    }
}
