/*!
  \file marking.hpp
  \brief Port effects of the 1-bit components and the nets that drive them

  Every state bit becomes one component. A pulse on a net reaching one of
  its ports applies an effect set drawn from {set, clear, toggle, out, nout}.
  Guards G of the per-bit expressions are realized as read chains: for a
  cube l1 & l2 & ... of G and trigger F, F reads the bit of l1 producing a
  new net, which reads the bit of l2, and so on. Cubes of a multi-cube guard
  are merged by a confluence net.
*/

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cell.hpp"
#include "decomposition.hpp"

namespace fluxsynth
{

/*! \brief Raised when an expression fits none of the pulse patterns. */
class unmappable_pattern : public std::runtime_error
{
public:
  unmappable_pattern( std::string where, std::string expression )
      : std::runtime_error( fmt::format( "{}: no pulse pattern for '{}'", where, expression ) ),
        expression_( std::move( expression ) )
  {
  }
  std::string const& expression() const { return expression_; }

private:
  std::string expression_;
};

struct port
{
  std::string net;
  uint8_t effects{ 0 };

  bool operator==( port const& ) const = default;
};

struct marked_component
{
  uint32_t bit{ 0 };
  std::vector<port> ports;

  port const* find( std::string const& net ) const
  {
    for ( auto const& p : ports )
      if ( p.net == net )
        return &p;
    return nullptr;
  }
};

/*! \brief An intermediate net: a read of one bit, or a confluence of several nets. */
struct generated_net
{
  enum class kind : uint8_t
  {
    read,
    merge
  };

  kind type{ kind::read };
  std::string name;
  std::vector<std::string> triggers; /* primary inputs whose pulses can reach this net */
  uint32_t source_bit{ 0 };          /* read: bit being read */
  bool positive{ true };             /* read: out (true) or nout (false) */
  std::string by;                    /* read: net that performs the read */
  std::vector<std::string> terms;    /* merge: merged nets */
  bdd_manager::node function{ bdd_manager::false_node };
  std::string expression;
};

/*! \brief Two set-storage bits cleared by a common trigger whose conjunction is read. */
struct and_group
{
  uint32_t bit_a{ 0 };
  uint32_t bit_b{ 0 };
  std::string trigger;
  std::string chain_net;  /* read of bit_a, consumed only by the read of bit_b */
  std::string output_net; /* conjunction & trigger */
  std::string set_a, set_b;
};

struct or_merge
{
  std::string net;
  std::vector<std::string> terms;
};

struct marked_design
{
  uint32_t width{ 0 };
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<std::string> output_nets; /* [output] -> driving net */
  std::vector<marked_component> components;
  std::vector<generated_net> nets;
  std::vector<and_group> and_groups;
  std::vector<or_merge> or_merges;
  std::shared_ptr<bdd_manager> manager;

  generated_net const* find_net( std::string const& name ) const
  {
    for ( auto const& n : nets )
      if ( n.name == name )
        return &n;
    return nullptr;
  }

  marked_component const* component( uint32_t bit ) const
  {
    for ( auto const& c : components )
      if ( c.bit == bit )
        return &c;
    return nullptr;
  }

  bool is_input( std::string const& name ) const
  {
    return std::find( inputs.begin(), inputs.end(), name ) != inputs.end();
  }

  std::vector<std::string> triggers_of( std::string const& net ) const
  {
    if ( is_input( net ) )
      return { net };
    if ( auto n = find_net( net ) )
      return n->triggers;
    return {};
  }

  /*! \brief Number of places consuming `net`: ports, merge terms, read drivers and outputs. */
  uint32_t consumers( std::string const& net ) const
  {
    uint32_t k = 0;
    for ( auto const& c : components )
      for ( auto const& p : c.ports )
        k += p.net == net;
    for ( auto const& n : nets )
      if ( n.type == generated_net::kind::merge )
        k += static_cast<uint32_t>( std::count( n.terms.begin(), n.terms.end(), net ) );
    for ( auto const& o : output_nets )
      k += o == net;
    return k;
  }
};

namespace detail
{

class marker
{
public:
  using node = bdd_manager::node;

  explicit marker( opt_result_table const& opt ) : opt_( opt ), m_( *opt.manager )
  {
    d_.width = opt.width;
    d_.inputs = opt.inputs;
    d_.outputs = opt.outputs;
    d_.manager = opt.manager;
    d_.output_nets.assign( opt.outputs.size(), "" );
    for ( uint32_t b = 0; b < opt.width; ++b )
      d_.components.push_back( { b, {} } );
    for ( auto const& i : opt.inputs )
      taken_.insert( i );
  }

  marked_design run()
  {
    for ( uint32_t o = 0; o < opt_.outputs.size(); ++o )
      mark_output( o );
    for ( uint32_t b = 0; b < opt_.width; ++b )
      for ( uint32_t sig = 0; sig < opt_.inputs.size(); ++sig )
        mark_bit( b, sig );
    prune_unobservable();
    return std::move( d_ );
  }

private:
  node input( uint32_t sig ) { return m_.var( opt_.input_var( sig ) ); }
  node qvar( uint32_t b ) { return m_.var( opt_.bit_var( b ) ); }

  std::string text( node f ) const { return m_.to_expr( m_.min_sop( f ) ).to_string(); }

  node without_inputs( node f )
  {
    for ( uint32_t s = 0; s < opt_.inputs.size(); ++s )
      f = m_.restrict( f, opt_.input_var( s ), false );
    return f;
  }

  node only_input( node f, uint32_t sig )
  {
    for ( uint32_t s = 0; s < opt_.inputs.size(); ++s )
      f = m_.restrict( f, opt_.input_var( s ), s == sig );
    return f;
  }

  bool depends_on_inputs( node f ) const
  {
    for ( auto v : m_.support( f ) )
      if ( v >= opt_.width )
        return true;
    return false;
  }

  std::string unique_name( std::string base )
  {
    auto name = base;
    for ( uint32_t k = 1; taken_.count( name ); ++k )
      name = fmt::format( "{}_{}", base, k );
    taken_.insert( name );
    return name;
  }

  void add_effect( uint32_t bit, std::string const& net, uint8_t fx )
  {
    auto& ports = d_.components[bit].ports;
    for ( auto& p : ports )
      if ( p.net == net )
      {
        p.effects |= fx;
        return;
      }
    ports.push_back( { net, fx } );
  }

  std::string const* existing( node function ) const
  {
    if ( auto it = by_function_.find( function ); it != by_function_.end() )
      return &it->second;
    return nullptr;
  }

  /* net whose pulses are exactly guard & F; `hint` names a newly created final net */
  std::string realize( node guard, uint32_t sig, std::string const& hint )
  {
    auto const& trigger = opt_.inputs[sig];
    if ( guard == bdd_manager::true_node )
      return trigger;
    auto const function = m_.conj( guard, input( sig ) );
    if ( auto e = existing( function ) )
      return *e;

    auto cubes = m_.min_sop( guard );
    std::vector<std::string> terms;
    for ( std::size_t ci = 0; ci < cubes.size(); ++ci )
    {
      auto& cube = cubes[ci];
      /* read order: ascending bit index */
      std::sort( cube.begin(), cube.end(), [&]( auto const& x, auto const& y ) { return x.first > y.first; } );
      std::string current = trigger;
      std::string label;
      std::vector<std::pair<uint32_t, bool>> prefix;
      for ( std::size_t li = 0; li < cube.size(); ++li )
      {
        auto const [var, positive] = cube[li];
        uint32_t const bit = opt_.width - 1 - var;
        prefix.emplace_back( var, positive );
        label += fmt::format( "{}q{}", positive ? "" : "n", bit );
        auto const f = m_.conj( m_.cube( prefix ), input( sig ) );
        if ( auto e = existing( f ) )
        {
          current = *e;
          continue;
        }
        bool const last = li + 1 == cube.size() && cubes.size() == 1;
        generated_net n;
        n.type = generated_net::kind::read;
        n.name = unique_name( last && !hint.empty() ? hint : fmt::format( "{}_{}", label, trigger ) );
        n.triggers = { trigger };
        n.source_bit = bit;
        n.positive = positive;
        n.by = current;
        n.function = f;
        n.expression = text( f );
        add_effect( bit, current, positive ? fx_out : fx_nout );
        by_function_.emplace( f, n.name );
        current = n.name;
        d_.nets.push_back( std::move( n ) );
      }
      terms.push_back( current );
    }
    if ( terms.size() == 1 )
      return terms.front();
    return merge( terms, function, { trigger },
                  hint.empty() ? fmt::format( "or_{}", trigger ) : hint );
  }

  std::string merge( std::vector<std::string> const& terms, node function, std::vector<std::string> triggers,
                     std::string const& base )
  {
    generated_net n;
    n.type = generated_net::kind::merge;
    n.name = unique_name( base );
    n.triggers = std::move( triggers );
    n.terms = terms;
    n.function = function;
    n.expression = text( function );
    by_function_.emplace( function, n.name );
    d_.or_merges.push_back( { n.name, terms } );
    d_.nets.push_back( n );
    return n.name;
  }

  void mark_output( uint32_t o )
  {
    auto const f = opt_.out[o];
    auto const& name = opt_.outputs[o];
    if ( without_inputs( f ) != bdd_manager::false_node )
      throw unmappable_pattern( "output " + name, text( f ) );

    std::vector<uint32_t> active;
    auto rebuilt = bdd_manager::false_node;
    for ( uint32_t sig = 0; sig < opt_.inputs.size(); ++sig )
    {
      auto const g = only_input( f, sig );
      if ( g == bdd_manager::false_node )
        continue;
      active.push_back( sig );
      rebuilt = m_.disj( rebuilt, m_.conj( g, input( sig ) ) );
    }
    if ( rebuilt != f )
      throw unmappable_pattern( "output " + name, text( f ) );
    if ( active.empty() )
      return; /* never pulses: left unconnected */

    if ( active.size() == 1 )
    {
      d_.output_nets[o] = realize( only_input( f, active[0] ), active[0], name );
      return;
    }
    if ( auto e = existing( f ) )
    {
      d_.output_nets[o] = *e;
      return;
    }
    std::vector<std::string> terms, triggers;
    for ( auto sig : active )
    {
      terms.push_back( realize( only_input( f, sig ), sig, "" ) );
      triggers.push_back( opt_.inputs[sig] );
    }
    d_.output_nets[o] = merge( terms, f, triggers, name );
  }

  void mark_bit( uint32_t b, uint32_t sig )
  {
    auto const e = opt_.next[b][sig];
    auto const where = fmt::format( "{} under {}", state_variable( b ), opt_.inputs[sig] );
    auto const q = qvar( b );
    auto const fvar = opt_.input_var( sig );
    for ( auto v : m_.support( e ) )
      if ( v >= opt_.width && v != fvar )
        throw unmappable_pattern( where, text( e ) );
    if ( m_.restrict( e, fvar, false ) != q )
      throw unmappable_pattern( where, text( e ) );

    auto const n = m_.restrict( e, fvar, true );
    auto const n1 = m_.restrict( n, opt_.bit_var( b ), true );
    auto const n0 = m_.restrict( n, opt_.bit_var( b ), false );
    auto const& trigger = opt_.inputs[sig];

    if ( n == q )
      return;
    if ( n == bdd_manager::true_node )
      return add_effect( b, trigger, fx_set );
    if ( n == bdd_manager::false_node )
      return add_effect( b, trigger, fx_clear );
    if ( n == m_.negate( q ) )
      return add_effect( b, trigger, fx_toggle );
    if ( n1 == bdd_manager::true_node )
      return add_effect( b, realize( n0, sig, "" ), fx_set );
    if ( n1 == m_.negate( n0 ) )
      return add_effect( b, realize( n0, sig, "" ), fx_toggle );
    if ( n0 == bdd_manager::false_node )
      return add_effect( b, realize( m_.negate( n1 ), sig, "" ), fx_clear );
    /* clear first, then set through the guard (which may read this bit before the clear) */
    add_effect( b, trigger, fx_clear );
    add_effect( b, realize( n, sig, "" ), fx_set );
  }

  void prune_unobservable()
  {
    bool changed = true;
    while ( changed )
    {
      changed = false;
      /* components never read cannot influence any output */
      for ( auto it = d_.components.begin(); it != d_.components.end(); )
      {
        bool read = false;
        for ( auto const& p : it->ports )
          read = read || ( p.effects & fx_read );
        if ( !read )
        {
          it = d_.components.erase( it );
          changed = true;
        }
        else
          ++it;
      }
      /* nets nobody consumes */
      for ( auto it = d_.nets.begin(); it != d_.nets.end(); )
      {
        if ( d_.consumers( it->name ) != 0 )
        {
          ++it;
          continue;
        }
        if ( it->type == generated_net::kind::read )
        {
          for ( auto& c : d_.components )
          {
            if ( c.bit != it->source_bit )
              continue;
            for ( auto p = c.ports.begin(); p != c.ports.end(); ++p )
              if ( p->net == it->by )
              {
                p->effects &= static_cast<uint8_t>( ~( it->positive ? fx_out : fx_nout ) );
                if ( p->effects == 0 )
                  c.ports.erase( p );
                break;
              }
          }
        }
        else
          d_.or_merges.erase( std::remove_if( d_.or_merges.begin(), d_.or_merges.end(),
                                              [&]( or_merge const& g ) { return g.net == it->name; } ),
                              d_.or_merges.end() );
        it = d_.nets.erase( it );
        changed = true;
      }
    }
  }

  opt_result_table const& opt_;
  bdd_manager& m_;
  marked_design d_;
  std::map<node, std::string> by_function_;
  std::set<std::string> taken_;
};

} // namespace detail

/*! \brief Marks every (bit, signal) effect and generates the guard nets.
 *
 * Outputs are processed first so that nets shared with the next-state logic
 * carry output names. Components that no net or output ever reads are
 * dropped, since their state cannot be observed.
 */
inline marked_design mark_effects( opt_result_table const& opt )
{
  return detail::marker( opt ).run();
}

/*! \brief Annotates AND groups; merge nets are already recorded as OR merges. */
inline void recognize_groups( marked_design& d )
{
  d.and_groups.clear();
  auto single_set_port = []( marked_component const& c ) -> std::string const* {
    std::string const* found = nullptr;
    for ( auto const& p : c.ports )
      if ( p.effects == fx_set )
      {
        if ( found )
          return nullptr;
        found = &p.net;
      }
    return found;
  };

  for ( auto const& n : d.nets )
  {
    if ( n.type != generated_net::kind::read || !n.positive || d.is_input( n.by ) )
      continue;
    auto const* first = d.find_net( n.by );
    if ( !first || first->type != generated_net::kind::read || !first->positive || !d.is_input( first->by ) )
      continue;
    auto const& trigger = first->by;
    auto const* ca = d.component( first->source_bit );
    auto const* cb = d.component( n.source_bit );
    if ( !ca || !cb || ca == cb )
      continue;
    if ( d.consumers( first->name ) != 1 )
      continue;

    auto const* set_a = single_set_port( *ca );
    auto const* set_b = single_set_port( *cb );
    if ( !set_a || !set_b )
      continue;
    auto const* fa = ca->find( trigger );
    auto const* fb = cb->find( trigger );
    auto const* rb = cb->find( first->name );
    if ( !fa || !fb || !rb || fa->effects != ( fx_clear | fx_out ) || fb->effects != fx_clear || rb->effects != fx_out )
      continue;
    if ( ca->ports.size() != 2 || cb->ports.size() != 3 )
      continue;
    d.and_groups.push_back( { first->source_bit, n.source_bit, trigger, first->name, n.name, *set_a, *set_b } );
  }
}

/*! \brief Reads that would observe a value already changed by the same trigger.
 *
 * A read performed by a derived net happens after the trigger reached every
 * port it drives directly, so it is sound only if no other port of the read
 * bit is driven from the same trigger. Reads inside an AND group are exempt.
 */
inline std::vector<std::string> read_order_violations( marked_design const& d )
{
  std::vector<std::string> issues;
  for ( auto const& n : d.nets )
  {
    if ( n.type != generated_net::kind::read || d.is_input( n.by ) )
      continue;
    bool grouped = false;
    for ( auto const& g : d.and_groups )
      grouped = grouped || g.output_net == n.name;
    if ( grouped )
      continue;
    auto const* c = d.component( n.source_bit );
    if ( !c )
      continue;
    for ( auto const& p : c->ports )
    {
      if ( p.net == n.by )
        continue;
      auto const tp = d.triggers_of( p.net );
      for ( auto const& t : n.triggers )
        if ( std::find( tp.begin(), tp.end(), t ) != tp.end() )
        {
          issues.push_back( fmt::format( "net {} reads Q{} after {} already drove port {}", n.name, n.source_bit, t, p.net ) );
          break;
        }
    }
  }
  return issues;
}

} // namespace fluxsynth
