import rclpy
from rclpy.node import Node
from sensor_msgs.msg import LaserScan
from carla_msgs.msg import CarlaEgoVehicleStatus
from std_msgs.msg import Float64
from TTC_Calculation.TTC_Calculation import TTC_Calculation


class TTC_Calculation_node(Node):
    def __init__(self):
        super().__init__('TTC_Calculation_node')
        self.TTC_Calculation = TTC_Calculation()
        self.obstacle_distance = None
        self.ego_speed = None
        self.obstacle_distance_subscriber = self.create_subscription(LaserScan, "/scan", self.obstacle_distance_callback, qos_profile=10)
        self.ego_speed_subscriber = self.create_subscription(CarlaEgoVehicleStatus, "/carla/ego_vehicle/vehicle_status", self.ego_speed_callback, qos_profile=10)
        self.ttc_publisher = self.create_publisher(Float64, "/aeb/ttc", qos_profile=10)
        self.timer = self.create_timer(1.0/20.0, self.execute)

    def obstacle_distance_callback(self, data):
        self.obstacle_distance = data.range_min

    def ego_speed_callback(self, data):
        self.ego_speed = data.velocity

    def execute(self):
        if self.obstacle_distance is None:
            self.get_logger().warn("msg not received")
            return
        if self.ego_speed is None:
            self.get_logger().warn("msg not received")
            return
        output = self.TTC_Calculation.execute(obstacle_distance=self.obstacle_distance, ego_speed=self.ego_speed)
        ttc_msg = Float64()
        ttc_msg.data = output['ttc']
        self.ttc_publisher.publish(ttc_msg)


def main(args=None):
    rclpy.init(args=args)
    node = TTC_Calculation_node()
    rclpy.spin(node)
    node.destroy_node()
    rclpy.shutdown()


if __name__ == '__main__':
    main()
