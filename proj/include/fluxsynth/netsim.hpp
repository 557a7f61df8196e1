/*!
  \file netsim.hpp
  \brief Zero-delay pulse simulation of mapped netlists and bounded equivalence checking

  Time advances in integer ticks. Within a tick, pulsed nets are processed in
  rank order: primary inputs have rank 0 and a net driven by an instance has
  rank (topological position of the instance + 1). Edges closing a cycle in
  the instance graph (found by depth-first search in instance order) deliver
  their pulse at the start of the next tick, before that tick's inputs.
*/

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cell.hpp"
#include "fsm.hpp"
#include "netlist.hpp"

namespace fluxsynth
{

class simulation_error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct sim_options
{
  /* deliver cycle-closing edges one tick later; otherwise such a pulse is an error */
  bool feedback_delay{ true };
};

/*! \brief Mutable state of a simulation: storage bits, gate flags, deferred deliveries. */
struct sim_state
{
  std::vector<uint8_t> bits;  /* per instance: storage state or gate flags (bit 0/1) */
  std::vector<int64_t> fired; /* per instance: last wave slot (2 * tick + wave) a merge cell emitted */
  std::vector<std::pair<uint32_t, uint32_t>> deferred; /* (instance, port) for the next tick */
  int64_t tick{ 0 };

  bool operator==( sim_state const& ) const = default;
};

class simulator
{
public:
  simulator( netlist const& n, pdk const& lib, sim_options opt = {} ) : netlist_( n ), opt_( opt )
  {
    auto net_id = [&]( std::string const& name ) {
      auto [it, fresh] = net_index_.emplace( name, static_cast<uint32_t>( net_names_.size() ) );
      if ( fresh )
        net_names_.push_back( name );
      return it->second;
    };
    for ( auto const& i : n.inputs )
      input_nets_.push_back( net_id( i ) );

    for ( auto const& inst : n.instances )
    {
      auto const& c = lib.get_cell( inst.cell );
      compiled ci{ &c, {}, {} };
      ci.in_net.assign( c.ports.size(), UINT32_MAX );
      for ( auto const& pin : c.output_pins() )
        ci.out_net[pin] = UINT32_MAX;
      for ( auto const& [pin, net] : inst.pins )
      {
        auto const id = net_id( net );
        if ( auto p = c.port_index( pin ); p >= 0 )
          ci.in_net[p] = id;
        else if ( c.is_output_pin( pin ) )
          ci.out_net[pin] = id;
        else
          throw validation_error( fmt::format( "instance {}: cell {} has no pin '{}'", inst.name, c.name, pin ) );
      }
      for ( std::size_t p = 0; p < c.ports.size(); ++p )
        if ( ci.in_net[p] == UINT32_MAX )
          throw validation_error( fmt::format( "instance {}: pin {} is unbound", inst.name, c.ports[p].name ) );
      cells_.push_back( std::move( ci ) );
    }
    for ( auto const& [name, net] : n.outputs )
      output_nets_.push_back( net.empty() ? UINT32_MAX : net_id( net ) );

    auto const nn = net_names_.size();
    sinks_.assign( nn, {} );
    driver_.assign( nn, UINT32_MAX );
    for ( uint32_t i = 0; i < cells_.size(); ++i )
    {
      for ( uint32_t p = 0; p < cells_[i].in_net.size(); ++p )
        sinks_[cells_[i].in_net[p]].push_back( { i, p, false } );
      for ( auto const& [pin, net] : cells_[i].out_net )
      {
        if ( net == UINT32_MAX )
          continue;
        if ( driver_[net] != UINT32_MAX || std::find( input_nets_.begin(), input_nets_.end(), net ) != input_nets_.end() )
          throw validation_error( fmt::format( "net {} has more than one driver", net_names_[net] ) );
        driver_[net] = i;
      }
    }
    order_instances();
    reset();
  }

  void reset()
  {
    state_ = sim_state{};
    state_.bits.assign( cells_.size(), 0 );
    state_.fired.assign( cells_.size(), -1 );
  }

  sim_state const& state() const { return state_; }
  void restore( sim_state const& s ) { state_ = s; }

  /*! \brief Number of (net, sink) edges delivered one tick late. */
  std::size_t feedback_edges() const
  {
    std::size_t k = 0;
    for ( auto const& s : sinks_ )
      for ( auto const& e : s )
        k += e.deferred;
    return k;
  }

  std::string const& net_name( uint32_t id ) const { return net_names_[id]; }

  /*! \brief Runs one tick with the given inputs pulsed; returns pulsed output indices in order. */
  std::vector<uint32_t> step( std::vector<uint32_t> const& pulsed_inputs )
  {
    auto const tick = state_.tick;
    std::vector<bool> pulsed( net_names_.size(), false );

    /* wave 0 settles the feedback deliveries of the previous tick, wave 1 the inputs */
    auto deferred = std::move( state_.deferred );
    state_.deferred.clear();
    for ( int wave = 0; wave < 2; ++wave )
    {
      std::set<std::pair<int64_t, uint32_t>> pending; /* (rank, net) */
      std::vector<bool> done( net_names_.size(), false );
      auto const slot = 2 * tick + wave;
      auto emit = [&]( uint32_t net ) {
        if ( net == UINT32_MAX )
          return;
        if ( done[net] )
          throw simulation_error( fmt::format( "same-tick causal cycle through net {} at tick {}", net_names_[net], tick ) );
        pending.emplace( rank_[net], net );
      };
      if ( wave == 0 )
        for ( auto const& [inst, port] : deferred )
          react( inst, port, slot, emit );
      else
        for ( auto i : pulsed_inputs )
          emit( input_nets_.at( i ) );

      while ( !pending.empty() )
      {
        auto const [rank, net] = *pending.begin();
        pending.erase( pending.begin() );
        done[net] = pulsed[net] = true;
        for ( auto const& s : sinks_[net] )
        {
          if ( s.deferred )
          {
            if ( !opt_.feedback_delay )
              throw simulation_error( fmt::format( "same-tick causal cycle: net {} feeds back into instance {}",
                                                   net_names_[net], netlist_.instances[s.instance].name ) );
            state_.deferred.emplace_back( s.instance, s.port );
            continue;
          }
          react( s.instance, s.port, slot, emit );
        }
      }
    }

    std::vector<uint32_t> outs;
    for ( uint32_t o = 0; o < output_nets_.size(); ++o )
      if ( output_nets_[o] != UINT32_MAX && pulsed[output_nets_[o]] )
        outs.push_back( o );
    ++state_.tick;
    return outs;
  }

private:
  struct compiled
  {
    cell const* c;
    std::vector<uint32_t> in_net;
    std::map<std::string, uint32_t> out_net;
  };

  struct sink
  {
    uint32_t instance;
    uint32_t port;
    bool deferred;
  };

  void order_instances()
  {
    auto const n = cells_.size();
    std::vector<uint8_t> mark( n, 0 ); /* 0 new, 1 on stack, 2 done */
    std::vector<uint32_t> post;
    struct frame
    {
      uint32_t inst;
      std::vector<std::pair<uint32_t, uint32_t>> edges; /* (net, sink slot) */
      std::size_t next;
    };
    auto successors = [&]( uint32_t i ) {
      std::vector<std::pair<uint32_t, uint32_t>> e;
      for ( auto const& pin : cells_[i].c->output_pins() )
      {
        auto const net = cells_[i].out_net.at( pin );
        if ( net == UINT32_MAX )
          continue;
        for ( uint32_t k = 0; k < sinks_[net].size(); ++k )
          e.emplace_back( net, k );
      }
      return e;
    };
    for ( uint32_t root = 0; root < n; ++root )
    {
      if ( mark[root] )
        continue;
      std::vector<frame> stack{ { root, successors( root ), 0 } };
      mark[root] = 1;
      while ( !stack.empty() )
      {
        auto& top = stack.back();
        if ( top.next == top.edges.size() )
        {
          mark[top.inst] = 2;
          post.push_back( top.inst );
          stack.pop_back();
          continue;
        }
        auto const [net, slot] = top.edges[top.next++];
        auto& s = sinks_[net][slot];
        if ( mark[s.instance] == 1 )
          s.deferred = true;
        else if ( mark[s.instance] == 0 )
        {
          mark[s.instance] = 1;
          auto const next = s.instance;
          stack.push_back( { next, successors( next ), 0 } );
        }
      }
    }
    std::vector<uint32_t> position( n );
    for ( uint32_t k = 0; k < n; ++k )
      position[post[n - 1 - k]] = k;
    rank_.assign( net_names_.size(), 0 );
    for ( uint32_t net = 0; net < net_names_.size(); ++net )
      if ( driver_[net] != UINT32_MAX )
        rank_[net] = position[driver_[net]] + 1;
  }

  template<class Emit>
  void react( uint32_t inst, uint32_t port, int64_t slot, Emit&& emit )
  {
    auto& ci = cells_[inst];
    auto const& c = *ci.c;
    auto const& p = c.ports[port];
    auto& s = state_.bits[inst];
    auto out = [&]( std::string const& pin ) { emit( ci.out_net.at( pin ) ); };

    switch ( c.kind )
    {
    case cell_kind::storage:
      if ( ( p.effects & fx_out ) && s )
        out( p.out_pin );
      if ( ( p.effects & fx_nout ) && !s )
        out( p.nout_pin );
      if ( p.effects & fx_set )
        s = 1;
      if ( p.effects & fx_clear )
        s = 0;
      if ( p.effects & fx_toggle )
        s ^= 1;
      break;
    case cell_kind::and_:
    case cell_kind::or_:
    case cell_kind::xor_:
      if ( p.effects & fx_read )
      {
        bool const a = s & 1u, b = s & 2u;
        bool const v = c.kind == cell_kind::and_ ? ( a && b ) : c.kind == cell_kind::or_ ? ( a || b ) : ( a != b );
        if ( v )
          out( p.out_pin );
        s = 0;
      }
      else
      {
        /* data port: the k-th data port owns flag bit k */
        uint32_t k = 0;
        for ( uint32_t q = 0; q < port; ++q )
          k += !( c.ports[q].effects & fx_read );
        s |= static_cast<uint8_t>( 1u << k );
      }
      break;
    case cell_kind::merge:
      if ( state_.fired[inst] != slot )
      {
        state_.fired[inst] = slot;
        out( c.outputs.front() );
      }
      break;
    case cell_kind::split:
      for ( auto const& o : c.outputs )
        out( o );
      break;
    }
  }

  netlist const& netlist_;
  sim_options opt_;
  std::map<std::string, uint32_t> net_index_;
  std::vector<std::string> net_names_;
  std::vector<uint32_t> input_nets_;
  std::vector<uint32_t> output_nets_;
  std::vector<compiled> cells_;
  std::vector<std::vector<sink>> sinks_;
  std::vector<uint32_t> driver_;
  std::vector<int64_t> rank_;
  sim_state state_;
};

/*! \brief Simulates ticks 0..horizon-1; several inputs may pulse in the same tick. */
inline pulse_trace simulate( netlist const& n, pdk const& lib, std::vector<pulse_event> const& stimulus, int64_t horizon,
                             sim_options opt = {} )
{
  simulator sim( n, lib, opt );
  pulse_trace trace;
  trace.inputs = stimulus;
  std::map<int64_t, std::vector<uint32_t>> by_tick;
  for ( auto const& e : stimulus )
  {
    auto const it = std::find( n.inputs.begin(), n.inputs.end(), e.signal );
    if ( it == n.inputs.end() )
      throw validation_error( fmt::format( "stimulus names unknown input '{}'", e.signal ) );
    if ( e.tick < 0 || e.tick >= horizon )
      throw validation_error( fmt::format( "stimulus tick {} outside the horizon {}", e.tick, horizon ) );
    by_tick[e.tick].push_back( static_cast<uint32_t>( it - n.inputs.begin() ) );
  }
  for ( int64_t t = 0; t < horizon; ++t )
  {
    auto const it = by_tick.find( t );
    for ( auto o : sim.step( it == by_tick.end() ? std::vector<uint32_t>{} : it->second ) )
      trace.outputs.push_back( { t, n.outputs[o].first } );
  }
  return trace;
}

/*! \brief Value-change dump of a trace; each pulse is high for one half tick. */
inline std::string write_vcd( pulse_trace const& trace, std::vector<std::string> const& inputs,
                              std::vector<std::string> const& outputs, std::string const& module = "top" )
{
  std::vector<std::string> signals = inputs;
  signals.insert( signals.end(), outputs.begin(), outputs.end() );
  auto code = [&]( std::size_t i ) {
    std::string c;
    do
    {
      c += static_cast<char>( '!' + i % 94 );
      i /= 94;
    } while ( i );
    return c;
  };
  std::string s = "$timescale 1ns $end\n";
  s += fmt::format( "$scope module {} $end\n", module );
  for ( std::size_t i = 0; i < signals.size(); ++i )
    s += fmt::format( "$var wire 1 {} {} $end\n", code( i ), signals[i] );
  s += "$upscope $end\n$enddefinitions $end\n";

  std::map<int64_t, std::vector<std::size_t>> rise;
  auto index = [&]( std::string const& name, std::size_t from ) {
    for ( std::size_t i = from; i < signals.size(); ++i )
      if ( signals[i] == name )
        return i;
    throw validation_error( fmt::format( "trace names unknown signal '{}'", name ) );
  };
  for ( auto const& e : trace.inputs )
    rise[e.tick].push_back( index( e.signal, 0 ) );
  for ( auto const& e : trace.outputs )
    rise[e.tick].push_back( index( e.signal, inputs.size() ) );

  s += "$dumpvars\n";
  for ( std::size_t i = 0; i < signals.size(); ++i )
    s += "0" + code( i ) + "\n";
  s += "$end\n";
  for ( auto const& [tick, sigs] : rise )
  {
    s += fmt::format( "#{}\n", 2 * tick );
    for ( auto i : sigs )
      s += "1" + code( i ) + "\n";
    s += fmt::format( "#{}\n", 2 * tick + 1 );
    for ( auto i : sigs )
      s += "0" + code( i ) + "\n";
  }
  return s;
}

struct equivalence_result
{
  bool equivalent{ true };
  uint32_t depth{ 0 };
  uint64_t sequences{ 0 };            /* sequences of maximal length replayed */
  std::vector<std::string> counterexample; /* one input per tick starting at tick 0 */
  std::string detail;
};

/*! \brief Compares the machine and the netlist on every sequence of at most `max_len` pulses.
 *
 * One input pulse per tick at consecutive ticks. Sequences are explored in
 * lexicographic order of input declaration indices, so the reported
 * counterexample is the lexicographically smallest shortest-prefix mismatch.
 */
inline equivalence_result check_equivalence( finite_state_machine const& fsm, netlist const& n, pdk const& lib,
                                             uint32_t max_len, sim_options opt = {} )
{
  if ( n.inputs != fsm.inputs )
    throw validation_error( "netlist inputs do not match the machine inputs" );
  std::vector<std::string> outs;
  for ( auto const& o : n.outputs )
    outs.push_back( o.first );
  if ( outs != fsm.outputs )
    throw validation_error( "netlist outputs do not match the machine outputs" );

  equivalence_result res;
  res.depth = max_len;
  if ( max_len == 0 )
    return res;
  simulator sim( n, lib, opt );
  std::vector<uint32_t> seq;

  auto names = [&]( std::vector<uint32_t> const& ids ) {
    std::string s;
    for ( auto i : ids )
      s += ( s.empty() ? "" : "," ) + fsm.outputs[i];
    return "{" + s + "}";
  };
  auto fail = [&]( std::string detail ) {
    res.equivalent = false;
    for ( auto i : seq )
      res.counterexample.push_back( fsm.inputs[i] );
    res.detail = std::move( detail );
  };

  std::function<bool( uint32_t )> dfs = [&]( uint32_t state ) -> bool {
    if ( seq.size() == max_len )
    {
      ++res.sequences;
      auto const saved = sim.state();
      auto const late = sim.step( {} );
      sim.restore( saved );
      if ( !late.empty() )
      {
        fail( fmt::format( "netlist emits {} one tick after the last input", names( late ) ) );
        return false;
      }
      return true;
    }
    auto const saved = sim.state();
    for ( uint32_t sig = 0; sig < fsm.inputs.size(); ++sig )
    {
      seq.push_back( sig );
      auto const ref = fsm_step( fsm, state, sig );
      auto expect = ref.outputs;
      std::sort( expect.begin(), expect.end() );
      auto const got = sim.step( { sig } );
      if ( got != expect )
      {
        fail( fmt::format( "tick {}: machine emits {}, netlist emits {}", seq.size() - 1, names( expect ), names( got ) ) );
        return false;
      }
      if ( !dfs( ref.next ) )
        return false;
      seq.pop_back();
      sim.restore( saved );
    }
    return true;
  };
  dfs( fsm.initial );
  return res;
}

} // namespace fluxsynth
