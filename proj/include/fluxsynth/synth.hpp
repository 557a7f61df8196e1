/*!
  \file synth.hpp
  \brief End-to-end synthesis: encoding search, decomposition, mapping, verification

  Encodings are consumed in enumeration order by a pool of workers; each
  worker runs the whole per-encoding pipeline serially. In deterministic
  mode the successful encoding with the smallest ordinal wins, so the result
  does not depend on the number of workers. When every encoding of a width
  fails, the width grows by one, up to one bit per state.
*/

#pragma once

#include <algorithm>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "balancer.hpp"
#include "decomposition.hpp"
#include "encoding.hpp"
#include "mapping.hpp"
#include "marking.hpp"
#include "netsim.hpp"

namespace fluxsynth
{

struct synth_config
{
  uint32_t jobs{ 1 };
  bool deterministic{ true };
  uint64_t max_encodings{ default_max_encodings }; /* per width */
  uint32_t check_depth{ 5 };
  std::optional<uint32_t> splitters; /* fanout limit, none when unset */
};

struct synth_attempt
{
  uint32_t width{ 0 };
  uint64_t ordinal{ 0 };
  std::string reason;
};

struct synth_result
{
  netlist net;
  state_encoding encoding;
  uint64_t attempts{ 0 };
  std::vector<synth_attempt> failures; /* attempts before the winner, in order */
  cost_report cost;
  equivalence_result verdict;
};

/*! \brief No encoding could be mapped at any admissible width. */
class exhaustion_error : public std::runtime_error
{
public:
  exhaustion_error( std::string const& message, std::vector<std::pair<std::string, uint32_t>> common )
      : std::runtime_error( message ), common_( std::move( common ) )
  {
  }

  /*! \brief Unmapped signatures by decreasing frequency. */
  std::vector<std::pair<std::string, uint32_t>> const& common_signatures() const { return common_; }

private:
  std::vector<std::pair<std::string, uint32_t>> common_;
};

/*! \brief The mapped netlist disagrees with the machine on some input sequence. */
class equivalence_failure : public std::runtime_error
{
public:
  equivalence_failure( std::string const& message, std::vector<std::string> counterexample )
      : std::runtime_error( message ), counterexample_( std::move( counterexample ) )
  {
  }

  std::vector<std::string> const& counterexample() const { return counterexample_; }

private:
  std::vector<std::string> counterexample_;
};

inline ordered_json encoding_to_json( finite_state_machine const& fsm, state_encoding const& enc )
{
  ordered_json e = ordered_json::object();
  for ( uint32_t s = 0; s < fsm.states.size(); ++s )
    e[fsm.states[s]] = enc.code_string( s );
  return e;
}

/*! \brief Marks and maps an optimized table; unmappable patterns become failures. */
inline mapping_result map_table( opt_result_table const& opt, pdk const& lib, std::string const& name )
{
  marked_design d;
  try
  {
    d = mark_effects( opt );
  }
  catch ( unmappable_pattern const& e )
  {
    mapping_failure f;
    f.reasons.push_back( e.what() );
    return f;
  }
  recognize_groups( d );
  return map_components( d, lib, name );
}

/*! \brief The full pipeline for one encoding. */
inline mapping_result synthesize_encoding( finite_state_machine const& fsm, state_encoding const& enc, pdk const& lib )
{
  auto const opt = per_bit_expressions( extract_tables( fsm, enc ) );
  auto r = map_table( opt, lib, fsm.name );
  if ( auto* n = std::get_if<netlist>( &r ) )
  {
    ordered_json meta;
    meta["fsm"] = fsm.name;
    meta["states"] = fsm.states.size();
    meta["width"] = enc.width;
    meta["ordinal"] = enc.ordinal;
    meta["encoding"] = encoding_to_json( fsm, enc );
    for ( auto const& [k, v] : n->metadata.items() )
      meta[k] = v;
    n->metadata = std::move( meta );
  }
  return r;
}

namespace detail
{

struct width_outcome
{
  std::optional<std::pair<state_encoding, netlist>> success;
  uint64_t attempts{ 0 };
  std::vector<synth_attempt> failures;
  std::map<std::string, uint32_t> signature_counts;
};

inline width_outcome search_width( finite_state_machine const& fsm, uint32_t width, pdk const& lib, synth_config const& cfg )
{
  encoding_tree tree( fsm, width );
  std::mutex mu;
  uint64_t issued = 0;
  bool exhausted = false;
  std::optional<uint64_t> best, first_seen;
  std::map<uint64_t, std::pair<state_encoding, netlist>> wins;
  std::map<uint64_t, mapping_failure> losses;
  std::exception_ptr error;

  auto worker = [&]() {
    for ( ;; )
    {
      std::optional<state_encoding> leaf;
      {
        std::lock_guard lock( mu );
        /* encodings are issued in ordinal order, so nothing after a success can beat it */
        if ( exhausted || error || best || issued >= cfg.max_encodings )
          return;
        leaf = tree.next();
        if ( !leaf )
        {
          exhausted = true;
          return;
        }
        ++issued;
      }
      try
      {
        auto r = synthesize_encoding( fsm, *leaf, lib );
        std::lock_guard lock( mu );
        if ( auto* n = std::get_if<netlist>( &r ) )
        {
          if ( !best || leaf->ordinal < *best )
            best = leaf->ordinal;
          if ( !first_seen )
            first_seen = leaf->ordinal;
          wins.emplace( leaf->ordinal, std::make_pair( *leaf, std::move( *n ) ) );
        }
        else
          losses.emplace( leaf->ordinal, std::get<mapping_failure>( std::move( r ) ) );
      }
      catch ( ... )
      {
        std::lock_guard lock( mu );
        if ( !error )
          error = std::current_exception();
      }
    }
  };

  auto const jobs = std::max( 1u, cfg.jobs );
  if ( jobs == 1 )
    worker();
  else
  {
    std::vector<std::thread> pool;
    for ( uint32_t j = 0; j < jobs; ++j )
      pool.emplace_back( worker );
    for ( auto& t : pool )
      t.join();
  }
  if ( error )
    std::rethrow_exception( error );

  width_outcome out;
  std::optional<uint64_t> chosen;
  if ( !wins.empty() )
    /* in-flight workers may have finished smaller ordinals after the first success */
    chosen = cfg.deterministic ? wins.begin()->first : *first_seen;
  for ( auto const& [ord, f] : losses )
  {
    if ( chosen && ord > *chosen )
      break;
    out.failures.push_back( { width, ord, f.summary() } );
    for ( auto const& s : f.signatures )
      ++out.signature_counts[s];
  }
  if ( chosen )
  {
    out.success = wins.at( *chosen );
    out.attempts = cfg.deterministic ? *chosen + 1 : issued;
  }
  else
    out.attempts = issued;
  return out;
}

} // namespace detail

/*! \brief Synthesizes, optionally legalizes fanout, and verifies a machine. */
inline synth_result synthesize( finite_state_machine const& fsm, pdk const& lib, synth_config const& cfg = {} )
{
  if ( cfg.jobs < 1 || cfg.max_encodings < 1 )
    throw validation_error( "jobs and max encodings must be at least 1" );
  auto const first = minimal_width( fsm.states.size() );
  auto const last = std::min<uint32_t>( std::max<uint32_t>( first, static_cast<uint32_t>( fsm.states.size() ) ), max_encoding_width );

  synth_result result;
  std::map<std::string, uint32_t> signatures;
  for ( auto width = first; width <= last; ++width )
  {
    auto o = detail::search_width( fsm, width, lib, cfg );
    result.attempts += o.attempts;
    result.failures.insert( result.failures.end(), o.failures.begin(), o.failures.end() );
    for ( auto const& [s, k] : o.signature_counts )
      signatures[s] += k;
    if ( !o.success )
      continue;

    result.encoding = o.success->first;
    result.net = std::move( o.success->second );
    if ( cfg.splitters )
      insert_splitters( result.net, lib, *cfg.splitters );
    result.net.metadata["attempts"] = result.attempts;

    result.verdict = check_equivalence( fsm, result.net, lib, cfg.check_depth );
    if ( !result.verdict.equivalent )
    {
      std::string seq;
      for ( auto const& s : result.verdict.counterexample )
        seq += ( seq.empty() ? "" : " " ) + s;
      throw equivalence_failure( fmt::format( "synthesized netlist for {} differs from the machine on [{}]: {}", fsm.name,
                                              seq, result.verdict.detail ),
                                 result.verdict.counterexample );
    }
    result.net.metadata["equivalence"] = fmt::format( "equivalent up to depth {}", cfg.check_depth );
    result.cost = report( result.net, lib );
    return result;
  }

  std::vector<std::pair<std::string, uint32_t>> common( signatures.begin(), signatures.end() );
  std::stable_sort( common.begin(), common.end(), []( auto const& a, auto const& b ) { return a.second > b.second; } );
  std::string listed;
  for ( std::size_t i = 0; i < common.size() && i < 5; ++i )
    listed += fmt::format( "{}{} x{}", listed.empty() ? "" : ", ", common[i].first, common[i].second );
  if ( listed.empty() && !result.failures.empty() )
    listed = result.failures.front().reason;
  throw exhaustion_error( fmt::format( "no mappable encoding for {} at widths {}..{} after {} attempts{}{}", fsm.name, first,
                                       last, result.attempts, listed.empty() ? "" : "; most common unmapped: ", listed ),
                          std::move( common ) );
}

/*! \brief The N-bit up-counter as an explicit machine (2^N states). */
inline finite_state_machine counter_fsm( uint32_t bits )
{
  if ( bits < 1 || bits > 16 )
    throw validation_error( fmt::format( "explicit counter machines support 1..16 bits, got {}", bits ) );
  finite_state_machine f;
  f.name = "counter";
  f.inputs = { "Din", "Rst", "Clk" };
  for ( uint32_t k = 0; k < bits; ++k )
    f.outputs.push_back( fmt::format( "Out{}", k + 1 ) );
  uint32_t const n = 1u << bits;
  for ( uint32_t s = 0; s < n; ++s )
    f.states.push_back( fmt::format( "C{}", s ) );
  f.initial = 0;
  for ( uint32_t s = 0; s < n; ++s )
  {
    if ( ( s + 1 ) % n != s )
      f.transitions[{ s, 0 }] = ( s + 1 ) % n;
    if ( s != 0 )
      f.transitions[{ s, 1 }] = 0;
    for ( uint32_t k = 0; k < bits; ++k )
      if ( ( s >> k ) & 1u )
        f.output_rules.emplace( s, 2, k );
  }
  return f;
}

/*! \brief Counter synthesized bit by bit from its equations, for widths beyond explicit machines. */
inline netlist synthesize_counter( uint32_t bits, pdk const& lib )
{
  if ( bits < 1 || bits > 64 )
    throw validation_error( fmt::format( "counter width must be 1..64, got {}", bits ) );
  auto r = map_table( counter_opt_table( bits ), lib, fmt::format( "counter{}", bits ) );
  if ( auto* f = std::get_if<mapping_failure>( &r ) )
    throw exhaustion_error( fmt::format( "counter{} does not map: {}", bits, f->summary() ), {} );
  auto n = std::get<netlist>( std::move( r ) );
  ordered_json meta;
  meta["fsm"] = n.name;
  meta["width"] = bits;
  meta["encoding"] = "binary";
  for ( auto const& [k, v] : n.metadata.items() )
    meta[k] = v;
  n.metadata = std::move( meta );
  return n;
}

/*! \brief Replays `pulses` increments, each followed by a Clk, and compares the sampled count.
 *
 * Returns a description of the first disagreement, or nothing when every
 * sample shows the binary value of the number of increments so far.
 */
inline std::optional<std::string> verify_counter_counts( netlist const& n, pdk const& lib, uint32_t bits, uint64_t pulses )
{
  std::vector<pulse_event> stim;
  for ( uint64_t k = 0; k < pulses; ++k )
  {
    stim.push_back( { static_cast<int64_t>( 2 * k ), "Din" } );
    stim.push_back( { static_cast<int64_t>( 2 * k + 1 ), "Clk" } );
  }
  auto const trace = simulate( n, lib, stim, static_cast<int64_t>( 2 * pulses ) );
  std::vector<std::vector<uint32_t>> seen( pulses );
  for ( auto const& e : trace.outputs )
  {
    if ( e.tick % 2 == 0 )
      return fmt::format( "{} pulsed at tick {} without a clock", e.signal, e.tick );
    seen[static_cast<std::size_t>( e.tick / 2 )].push_back( static_cast<uint32_t>( std::stoul( e.signal.substr( 3 ) ) - 1 ) );
  }
  for ( uint64_t k = 0; k < pulses; ++k )
  {
    uint64_t value = 0;
    for ( auto b : seen[k] )
      value |= uint64_t{ 1 } << b;
    auto const expect = ( k + 1 ) & ( bits >= 64 ? ~uint64_t{ 0 } : ( ( uint64_t{ 1 } << bits ) - 1 ) );
    if ( value != expect )
      return fmt::format( "after {} increments the outputs read {} instead of {}", k + 1, value, expect );
  }
  return std::nullopt;
}

} // namespace fluxsynth
