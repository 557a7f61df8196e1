/*!
  \file decomposition.hpp
  \brief Input-transition tables and per-bit next-state/output expressions

  For an encoded machine every (state bit Qb, input F) pair gets a pulse-form
  expression E(Q, F) = !F & Qb | F & N(Q), where N is the next value of Qb
  after a pulse on F. Outputs take the form sum over F of G_F(Q) & F.
  Codes of unreachable or unassigned states are don't-cares.
*/

#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "bdd.hpp"
#include "encoding.hpp"
#include "fsm.hpp"
#include "sop.hpp"

namespace fluxsynth
{

/*! \brief Encoded transition and output behavior, indexed by code. */
struct transition_tables
{
  uint32_t width{ 0 };
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<bool> care;                          /* code -> reachable state code */
  std::vector<std::vector<uint64_t>> next;         /* [signal][code] -> next code */
  std::vector<std::vector<std::vector<bool>>> emit; /* [output][signal][code] */

  uint64_t codes() const { return uint64_t{ 1 } << width; }
};

/*! \brief Builds the encoded tables; non-care codes map to themselves and emit nothing. */
inline transition_tables extract_tables( finite_state_machine const& fsm, state_encoding const& enc )
{
  if ( enc.codes.size() != fsm.states.size() )
    throw validation_error( "encoding does not cover every state" );
  transition_tables t;
  t.width = enc.width;
  t.inputs = fsm.inputs;
  t.outputs = fsm.outputs;
  auto const n = t.codes();
  t.care.assign( n, false );
  t.next.assign( fsm.inputs.size(), std::vector<uint64_t>( n ) );
  t.emit.assign( fsm.outputs.size(),
                 std::vector<std::vector<bool>>( fsm.inputs.size(), std::vector<bool>( n, false ) ) );
  for ( auto& column : t.next )
    for ( uint64_t c = 0; c < n; ++c )
      column[c] = c;

  auto const unreachable = unreachable_states( fsm );
  for ( uint32_t s = 0; s < fsm.states.size(); ++s )
  {
    if ( std::find( unreachable.begin(), unreachable.end(), fsm.states[s] ) != unreachable.end() )
      continue;
    auto const code = enc.codes[s];
    t.care[code] = true;
    for ( uint32_t sig = 0; sig < fsm.inputs.size(); ++sig )
    {
      auto const r = fsm_step( fsm, s, sig );
      t.next[sig][code] = enc.codes[r.next];
      for ( auto o : r.outputs )
        t.emit[o][sig][code] = true;
    }
  }
  return t;
}

/*! \brief How the next value of one bit under one signal was realized. */
enum class bit_pattern : uint8_t
{
  hold,          /* N = Qb */
  set,           /* N = 1 */
  clear,         /* N = 0 */
  toggle,        /* N = !Qb */
  set_net,       /* N = Qb | G */
  toggle_net,    /* N = Qb ^ G */
  clear_set_net, /* N = G, G independent of Qb */
  clear_net,     /* N = Qb & !G */
  self           /* N = G, G reads Qb */
};

inline char const* to_string( bit_pattern p )
{
  switch ( p )
  {
  case bit_pattern::hold:
    return "hold";
  case bit_pattern::set:
    return "set";
  case bit_pattern::clear:
    return "clear";
  case bit_pattern::toggle:
    return "toggle";
  case bit_pattern::set_net:
    return "set-net";
  case bit_pattern::toggle_net:
    return "toggle-net";
  case bit_pattern::clear_set_net:
    return "clear+set-net";
  case bit_pattern::clear_net:
    return "clear-net";
  case bit_pattern::self:
    return "self";
  }
  return "?";
}

inline std::string state_variable( uint32_t bit )
{
  return fmt::format( "Q{}", bit );
}

/*! \brief Optimized per-bit and per-output expressions over one shared BDD store.
 *
 * Variable order: Q(w-1) ... Q0, then the inputs in declaration order.
 */
struct opt_result_table
{
  using node = bdd_manager::node;

  uint32_t width{ 0 };
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::shared_ptr<bdd_manager> manager;
  std::vector<std::vector<node>> next;         /* [bit][signal] -> E(Q, F) */
  std::vector<std::vector<bit_pattern>> shape; /* [bit][signal], as chosen from the table */
  std::vector<node> out;                       /* [output] */

  uint32_t bit_var( uint32_t bit ) const { return width - 1 - bit; }
  uint32_t input_var( uint32_t signal ) const { return width + signal; }

  robdd next_bdd( uint32_t bit, uint32_t signal ) const { return { manager, next[bit][signal] }; }
  robdd out_bdd( uint32_t o ) const { return { manager, out[o] }; }

  bool_expr next_expr( uint32_t bit, uint32_t signal ) const { return to_min_sop( next_bdd( bit, signal ) ); }
  bool_expr out_expr( uint32_t o ) const { return to_min_sop( out_bdd( o ) ); }

  static std::vector<std::string> variable_order( uint32_t width, std::vector<std::string> const& inputs )
  {
    std::vector<std::string> order;
    for ( uint32_t b = width; b-- > 0; )
      order.push_back( state_variable( b ) );
    for ( auto const& i : inputs )
    {
      for ( auto const& q : order )
        if ( q == i )
          throw validation_error( fmt::format( "input '{}' collides with a state variable name", i ) );
      order.push_back( i );
    }
    return order;
  }

  /*! \brief Empty table with a fresh store; every entry starts as hold / no output. */
  static opt_result_table make( uint32_t width, std::vector<std::string> inputs, std::vector<std::string> outputs )
  {
    opt_result_table t;
    t.width = width;
    t.manager = std::make_shared<bdd_manager>( variable_order( width, inputs ) );
    t.inputs = std::move( inputs );
    t.outputs = std::move( outputs );
    t.next.assign( width, std::vector<node>( t.inputs.size() ) );
    t.shape.assign( width, std::vector<bit_pattern>( t.inputs.size(), bit_pattern::hold ) );
    for ( uint32_t b = 0; b < width; ++b )
      for ( uint32_t s = 0; s < t.inputs.size(); ++s )
        t.next[b][s] = t.manager->var( t.bit_var( b ) );
    t.out.assign( t.outputs.size(), bdd_manager::false_node );
    return t;
  }

  /*! \brief Sets entry (bit, signal) from the F=1 cofactor N. */
  void set_next( uint32_t bit, uint32_t signal, node n )
  {
    auto& m = *manager;
    next[bit][signal] = m.ite( m.var( input_var( signal ) ), n, m.var( bit_var( bit ) ) );
  }
};

namespace detail
{

/* Minimized function over the listed state bits: truth tables are indexed by
 * local minterms, local variable i standing for bits[i]. */
inline bdd_manager::node sop_over_bits( opt_result_table& t, std::vector<uint32_t> const& bits,
                                        std::vector<bool> const& on, std::vector<bool> const& dc )
{
  auto& m = *t.manager;
  auto const cover = minimize_cover( static_cast<uint32_t>( bits.size() ), on, dc );
  auto f = bdd_manager::false_node;
  for ( auto const& c : cover )
  {
    std::vector<std::pair<uint32_t, bool>> lits;
    for ( uint32_t i = 0; i < bits.size(); ++i )
      if ( ( c.mask >> i ) & 1u )
        lits.emplace_back( t.bit_var( bits[i] ), ( c.value >> i ) & 1u );
    f = m.disj( f, m.cube( lits ) );
  }
  return f;
}

/* Partial function of the state bits other than `bit`, built by projecting
 * care codes. Returns false when two care codes demand different values. */
struct projected
{
  std::vector<uint32_t> bits;
  std::vector<bool> on, dc;
  std::vector<bool> fixed;

  projected( uint32_t width, uint32_t skip )
  {
    for ( uint32_t b = 0; b < width; ++b )
      if ( b != skip )
        bits.push_back( b );
    auto const n = std::size_t{ 1 } << bits.size();
    on.assign( n, false );
    dc.assign( n, true );
    fixed.assign( n, false );
  }

  static uint64_t project( uint64_t code, uint32_t skip )
  {
    uint64_t const low = code & ( ( uint64_t{ 1 } << skip ) - 1 );
    return low | ( ( code >> ( skip + 1 ) ) << skip );
  }

  bool require( uint64_t local, bool value )
  {
    if ( fixed[local] && on[local] != value )
      return false;
    fixed[local] = true;
    dc[local] = false;
    on[local] = value;
    return true;
  }
};

} // namespace detail

/*! \brief Chooses the pattern for every (bit, signal) and minimizes the guards with don't-cares. */
inline opt_result_table per_bit_expressions( transition_tables const& tab )
{
  auto t = opt_result_table::make( tab.width, tab.inputs, tab.outputs );
  auto& m = *t.manager;
  auto const n = tab.codes();
  auto const w = tab.width;

  for ( uint32_t b = 0; b < w; ++b )
  {
    auto const qb = m.var( t.bit_var( b ) );
    for ( uint32_t sig = 0; sig < tab.inputs.size(); ++sig )
    {
      auto const nxt = [&]( uint64_t c ) { return static_cast<bool>( ( tab.next[sig][c] >> b ) & 1u ); };
      auto const cur = [&]( uint64_t c ) { return static_cast<bool>( ( c >> b ) & 1u ); };
      auto all = [&]( auto pred ) {
        for ( uint64_t c = 0; c < n; ++c )
          if ( tab.care[c] && !pred( c ) )
            return false;
        return true;
      };

      auto const choose = [&]( bit_pattern p, bdd_manager::node f ) {
        t.shape[b][sig] = p;
        t.set_next( b, sig, f );
      };

      if ( all( [&]( uint64_t c ) { return nxt( c ) == cur( c ); } ) )
      {
        choose( bit_pattern::hold, qb );
        continue;
      }
      if ( all( [&]( uint64_t c ) { return nxt( c ); } ) )
      {
        choose( bit_pattern::set, bdd_manager::true_node );
        continue;
      }
      if ( all( [&]( uint64_t c ) { return !nxt( c ); } ) )
      {
        choose( bit_pattern::clear, bdd_manager::false_node );
        continue;
      }
      if ( all( [&]( uint64_t c ) { return nxt( c ) != cur( c ); } ) )
      {
        choose( bit_pattern::toggle, m.negate( qb ) );
        continue;
      }

      /* guard over the other bits; `value` gives G for a care code or nullopt for don't-care */
      auto guard = [&]( auto value ) -> std::optional<bdd_manager::node> {
        detail::projected g( w, b );
        for ( uint64_t c = 0; c < n; ++c )
          if ( tab.care[c] )
            if ( auto v = value( c ) )
              if ( !g.require( detail::projected::project( c, b ), *v ) )
                return std::nullopt;
        return detail::sop_over_bits( t, g.bits, g.on, g.dc );
      };
      using opt = std::optional<bool>;

      if ( all( [&]( uint64_t c ) { return !cur( c ) || nxt( c ); } ) )
      {
        auto g = guard( [&]( uint64_t c ) { return cur( c ) ? opt{} : opt{ nxt( c ) }; } );
        choose( bit_pattern::set_net, m.disj( qb, *g ) );
        continue;
      }
      if ( auto g = guard( [&]( uint64_t c ) { return opt{ nxt( c ) != cur( c ) }; } ) )
      {
        choose( bit_pattern::toggle_net, m.exor( qb, *g ) );
        continue;
      }
      if ( auto g = guard( [&]( uint64_t c ) { return opt{ nxt( c ) }; } ) )
      {
        choose( bit_pattern::clear_set_net, *g );
        continue;
      }
      if ( all( [&]( uint64_t c ) { return cur( c ) || !nxt( c ); } ) )
      {
        auto g = guard( [&]( uint64_t c ) { return cur( c ) ? opt{ !nxt( c ) } : opt{}; } );
        choose( bit_pattern::clear_net, m.conj( qb, m.negate( *g ) ) );
        continue;
      }

      std::vector<uint32_t> bits;
      for ( uint32_t k = 0; k < w; ++k )
        bits.push_back( k );
      std::vector<bool> on( n, false ), dc( n, false );
      for ( uint64_t c = 0; c < n; ++c )
      {
        dc[c] = !tab.care[c];
        on[c] = tab.care[c] && nxt( c );
      }
      choose( bit_pattern::self, detail::sop_over_bits( t, bits, on, dc ) );
    }
  }

  std::vector<uint32_t> bits;
  for ( uint32_t k = 0; k < w; ++k )
    bits.push_back( k );
  for ( uint32_t o = 0; o < tab.outputs.size(); ++o )
  {
    auto sum = bdd_manager::false_node;
    for ( uint32_t sig = 0; sig < tab.inputs.size(); ++sig )
    {
      std::vector<bool> on( n, false ), dc( n, false );
      for ( uint64_t c = 0; c < n; ++c )
      {
        dc[c] = !tab.care[c];
        on[c] = tab.care[c] && tab.emit[o][sig][c];
      }
      auto const g = detail::sop_over_bits( t, bits, on, dc );
      sum = m.disj( sum, m.conj( g, m.var( t.input_var( sig ) ) ) );
    }
    t.out[o] = sum;
  }
  return t;
}

/*! \brief Optimized table of an N-bit up-counter built directly from its bit equations.
 *
 * Qk under Din toggles when Q0..Q(k-1) are all set, Rst clears every bit,
 * Clk holds the state and emits Out(k+1) = Qk & Clk. This avoids
 * materializing the 2^N-state machine.
 */
inline opt_result_table counter_opt_table( uint32_t bits )
{
  std::vector<std::string> outputs;
  for ( uint32_t k = 0; k < bits; ++k )
    outputs.push_back( fmt::format( "Out{}", k + 1 ) );
  auto t = opt_result_table::make( bits, { "Din", "Rst", "Clk" }, outputs );
  auto& m = *t.manager;
  auto carry = bdd_manager::true_node;
  for ( uint32_t k = 0; k < bits; ++k )
  {
    auto const q = m.var( t.bit_var( k ) );
    t.set_next( k, 0, m.exor( q, carry ) );
    t.shape[k][0] = k == 0 ? bit_pattern::toggle : bit_pattern::toggle_net;
    t.set_next( k, 1, bdd_manager::false_node );
    t.shape[k][1] = bit_pattern::clear;
    t.out[k] = m.conj( q, m.var( t.input_var( 2 ) ) );
    carry = m.conj( carry, q );
  }
  return t;
}

/*! \brief Tabular text of the encoded transition table and the optimized expressions. */
inline std::string dump_tables( finite_state_machine const& fsm, state_encoding const& enc,
                                transition_tables const& tab, opt_result_table const& opt )
{
  std::string s = fmt::format( "# input transition table ({} bit{})\n", enc.width, enc.width == 1 ? "" : "s" );
  s += fmt::format( "{:<8}{:<8}", "state", "code" );
  for ( auto const& i : fsm.inputs )
    s += fmt::format( "{:<14}", i );
  s += "\n";
  for ( uint32_t st = 0; st < fsm.states.size(); ++st )
  {
    auto const code = enc.codes[st];
    s += fmt::format( "{:<8}{:<8}", fsm.states[st], enc.code_string( st ) );
    for ( uint32_t sig = 0; sig < fsm.inputs.size(); ++sig )
    {
      auto const nxt = *enc.state_of( tab.next[sig][code] );
      std::string cell = enc.code_string( nxt );
      std::string emitted;
      for ( uint32_t o = 0; o < fsm.outputs.size(); ++o )
        if ( tab.emit[o][sig][code] )
          emitted += ( emitted.empty() ? "" : "," ) + fsm.outputs[o];
      if ( !emitted.empty() )
        cell += "/" + emitted;
      s += fmt::format( "{:<14}", cell );
    }
    s += tab.care[code] ? "\n" : "  (unreachable)\n";
  }

  s += "# decomposition\n";
  for ( uint32_t sig = 0; sig < opt.inputs.size(); ++sig )
    for ( uint32_t b = opt.width; b-- > 0; )
      s += fmt::format( "{:<6}Q{}* = {}   [{}]\n", opt.inputs[sig], b, opt.next_expr( b, sig ).to_string(),
                        to_string( opt.shape[b][sig] ) );
  for ( uint32_t o = 0; o < opt.outputs.size(); ++o )
    s += fmt::format( "{:<6}{} = {}\n", "out", opt.outputs[o], opt.out_expr( o ).to_string() );
  return s;
}

} // namespace fluxsynth
