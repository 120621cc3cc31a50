//! The descriptor wire format: parse, validate, canonical serialization.
//!
//! ```bash
//! cargo run --example descriptor_roundtrip
//! ```

use soafabric::descriptor::{
    parse_descriptor, serialize_descriptor, validate_descriptor, OperationSignature, ParamSpec,
    ParamType, ServiceDescriptor,
};

const DOCUMENT: &str = r#"
<definitions name="server2">
  <message name="EngBooksSearchRequest">
    <part name="title" type="text"/>
  </message>
  <message name="EngBooksSearchResponse">
    <part name="value" type="flag"/>
    <part name="date" type="integer"/>
    <part name="price" type="real"/>
  </message>
  <portType name="server2Port">
    <operation name="EngBooksSearch">
      <input message="EngBooksSearchRequest"/>
      <output message="EngBooksSearchResponse"/>
    </operation>
  </portType>
  <service name="server2">
    <port name="server2Port">
      <address location="node://server2"/>
    </port>
  </service>
</definitions>
"#;

fn main() {
    let descriptor = parse_descriptor(DOCUMENT).unwrap();
    println!(
        "parsed service `{}` at {} with {} operation(s)",
        descriptor.service_name,
        descriptor.endpoint,
        descriptor.operations.len()
    );
    for op in &descriptor.operations {
        println!("  {}: {} input(s), {} output(s)", op.name, op.inputs.len(), op.outputs.len());
    }

    // canonical form: messages sorted, two-space indent, LF endings
    let canonical = serialize_descriptor(&descriptor).unwrap();
    println!("\ncanonical serialization:\n{canonical}");
    assert_eq!(parse_descriptor(&canonical).unwrap(), descriptor);

    // the validator reports stable codes instead of failing
    let broken = ServiceDescriptor::new(
        "broken",
        "http://not-a-node",
        vec![
            OperationSignature::new("Search", vec![], vec![]),
            OperationSignature::new(
                "Search",
                vec![
                    ParamSpec::new("q", ParamType::Text),
                    ParamSpec::new("q", ParamType::Flag),
                ],
                vec![ParamSpec::new("hit", ParamType::Flag)],
            ),
        ],
    );
    println!("violations in a hand-built bad descriptor:");
    for violation in validate_descriptor(&broken) {
        println!("  {violation}");
    }

    // the parser rejects documents outside the grammar, with position info
    let dangling = DOCUMENT.replace("EngBooksSearchRequest\"/", "MissingRequest\"/");
    match parse_descriptor(&dangling) {
        Err(e) => println!("\ndangling reference rejected: {e}"),
        Ok(_) => unreachable!(),
    }
}
